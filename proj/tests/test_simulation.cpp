#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cascade/constants.hpp"
#include "cascade/correlation.hpp"
#include "cascade/errors.hpp"
#include "cascade/fitting.hpp"
#include "cascade/simulation.hpp"
#include "cascade/stream_io.hpp"
#include "oracles.hpp"

using namespace cascade;
namespace fs = std::filesystem;

namespace {

EmitterConfig ideal() { return EmitterConfig{}; }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cascade_sim_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

// pulse index → (xx timestamp, x timestamp) for pulses with both arms detected.
std::map<std::int64_t, std::pair<std::uint64_t, std::uint64_t>> coincident_pulses(const ProjectionRun& run) {
  std::map<std::int64_t, std::uint64_t> xx;
  for (const auto& e : run.xx.events)
    if (e.origin == Origin::kXX) xx[e.pulse] = e.timestamp;
  std::map<std::int64_t, std::pair<std::uint64_t, std::uint64_t>> out;
  for (const auto& e : run.x.events) {
    if (e.origin != Origin::kX) continue;
    if (auto it = xx.find(e.pulse); it != xx.end()) out[e.pulse] = {it->second, e.timestamp};
  }
  return out;
}

TEST(EmitterConfigCheck, RejectsOutOfRangeFields) {
  EXPECT_NO_THROW(ideal().validate());
  auto bad = [](auto mutate) {
    EmitterConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](auto& c) { c.tau_x = 0.0; }).validate(), ValidationError);
  EXPECT_THROW(bad([](auto& c) { c.rep_rate = -80.0; }).validate(), ValidationError);
  EXPECT_THROW(bad([](auto& c) { c.recapture_probability = 1.5; }).validate(), ValidationError);
  EXPECT_THROW(bad([](auto& c) { c.setup_efficiency = 0.0; }).validate(), ValidationError);
  EXPECT_THROW(bad([](auto& c) { c.excitation_fraction = 0.0; }).validate(), ValidationError);
  EXPECT_THROW(bad([](auto& c) { c.background_rate = -1.0; }).validate(), ValidationError);
  EXPECT_DOUBLE_EQ(ideal().rep_period_ps(), 12500.0);
}

TEST(IdealPairProbability, ReferenceValues) {
  const EmitterConfig c = ideal();
  const double T = PhysicalConstants::h / c.fss;
  EXPECT_NEAR(ideal_pair_probability(c, BasisPair::parse("VV"), 0.0), 0.5, 1e-15);
  EXPECT_NEAR(ideal_pair_probability(c, BasisPair::parse("VV"), T), 0.5, 1e-12);
  EXPECT_NEAR(ideal_pair_probability(c, BasisPair::parse("HV"), 0.0), 0.0, 1e-15);
  EXPECT_NEAR(ideal_pair_probability(c, BasisPair::parse("DA"), T / 2), 0.5, 1e-12);
  EXPECT_NEAR(ideal_pair_probability(c, BasisPair::parse("RL"), 0.0), 0.5, 1e-12);
  EXPECT_THROW(ideal_pair_probability(c, BasisPair::parse("HH"), -1.0), ValidationError);
}

TEST(IdealPairProbability, CompleteQuadruplesSumToOne) {
  const EmitterConfig c = ideal();
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> t(0.0, 1e4);
  for (int k = 0; k < 100; ++k) {
    const double d = t(rng);
    for (auto a : kAllPolarizations) {
      for (auto b : kAllPolarizations) {
        const double s = ideal_pair_probability(c, {a, b}, d) + ideal_pair_probability(c, {a, orthogonal(b)}, d) +
                         ideal_pair_probability(c, {orthogonal(a), b}, d) +
                         ideal_pair_probability(c, {orthogonal(a), orthogonal(b)}, d);
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
    }
  }
}

TEST(ProjectionRun, ForbiddenProjectionHasNoCoincidences) {
  EmitterConfig c = ideal();
  c.fss = 0.0;
  const auto run = simulate_projection_run(c, BasisPair::parse("HV"), 50000, 62);
  EXPECT_GT(run.xx.events.size(), 10000u);
  EXPECT_GT(run.x.events.size(), 10000u);
  EXPECT_TRUE(coincident_pulses(run).empty());
}

TEST(ProjectionRun, DeterministicBySeedByteForByte) {
  EmitterConfig c = ideal();
  c.background_rate = 5e4;
  c.jitter_sigma = 20.0;
  const auto a = simulate_projection_run(c, BasisPair::parse("DR"), 20000, 63);
  const auto b = simulate_projection_run(c, BasisPair::parse("DR"), 20000, 63);
  export_stream(a.xx, scratch("det_a.ctts"));
  export_stream(b.xx, scratch("det_b.ctts"));
  EXPECT_EQ(slurp(scratch("det_a.ctts")), slurp(scratch("det_b.ctts")));
  EXPECT_EQ(a.x.events, b.x.events);
  const auto other = simulate_projection_run(c, BasisPair::parse("DR"), 20000, 64);
  EXPECT_NE(a.x.events, other.x.events);
}

TEST(ProjectionRun, AtMostOnePhotonPerArmPerPulse) {
  EmitterConfig c = ideal();
  c.background_rate = 1e5;
  const auto run = simulate_projection_run(c, BasisPair::parse("HH"), 50000, 65);
  for (const auto* s : {&run.xx, &run.x}) {
    std::map<std::int64_t, int> per_pulse;
    std::size_t background = 0;
    for (const auto& e : s->events) {
      if (e.origin == Origin::kBackground) {
        ++background;
        continue;
      }
      EXPECT_EQ(++per_pulse[e.pulse], 1);
    }
    EXPECT_GT(background, 0u);
    EXPECT_NO_THROW(s->validate());
  }
}

TEST(ProjectionRun, CascadeDelaysAreExponentialInExcitonLifetime) {
  // HH passes with probability 1/2 at every phase, so the detected delays are unbiased.
  const auto pairs = coincident_pulses(simulate_projection_run(ideal(), BasisPair::parse("HH"), 200000, 66));
  ASSERT_GT(pairs.size(), 90000u);
  std::vector<double> delays;
  for (const auto& [pulse, t] : pairs) delays.push_back(static_cast<double>(t.second) - static_cast<double>(t.first));
  const double n = static_cast<double>(delays.size());
  EXPECT_LT(oracle::ks_exponential(delays, 1610.0), 1.628 / std::sqrt(n));  // 1% critical value
}

TEST(ProjectionRun, SingleArmMarginalsAreUnpolarized) {
  const EmitterConfig c = ideal();
  const auto h = simulate_projection_run(c, BasisPair::parse("HD"), 100000, 67);
  const auto v = simulate_projection_run(c, BasisPair::parse("VD"), 100000, 68);
  const double nh = static_cast<double>(h.xx.events.size()), nv = static_cast<double>(v.xx.events.size());
  EXPECT_LT(std::abs(nh - nv), 3.0 * std::sqrt(nh + nv));
  const auto r = simulate_projection_run(c, BasisPair::parse("DR"), 100000, 69);
  const auto l = simulate_projection_run(c, BasisPair::parse("DL"), 100000, 70);
  const double nr = static_cast<double>(r.x.events.size()), nl = static_cast<double>(l.x.events.size());
  EXPECT_LT(std::abs(nr - nl), 3.0 * std::sqrt(nr + nl));
}

TEST(ProjectionRun, VVCoincidencesDoNotOscillate) {
  // |<VV|ψ(t)>|² = 1/2 at every delay: the phase lives in the HH–VV coherence.
  const auto pairs = coincident_pulses(simulate_projection_run(ideal(), BasisPair::parse("VV"), 200000, 77));
  std::size_t early = 0, half_period = 0;
  for (const auto& [pulse, t] : pairs) {
    const double d = static_cast<double>(t.second) - static_cast<double>(t.first);
    early += d < 150.0;
    half_period += d >= 445.0 && d < 595.0;
  }
  // Equal-width windows differ only by the exponential decay e^{-445/1610}.
  const double want = static_cast<double>(early) * std::exp(-445.0 / 1610.0);
  EXPECT_LT(std::abs(static_cast<double>(half_period) - want), 4.0 * std::sqrt(want));
}

TEST(ProjectionRun, DiagonalCoincidencesOscillateAtSplittingPeriod) {
  const EmitterConfig c = ideal();
  const auto run = simulate_projection_run(c, BasisPair::parse("DD"), 1000000, 71);
  const auto xx = run.xx.timestamps(), x = run.x.timestamps();
  const Histogram h = correlate_range(xx, x, 20, 0, 4000);
  std::vector<double> t, y, w;
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double decay = std::exp(-h.bin_center(k) / c.tau_x);
    t.push_back(h.bin_center(k));
    y.push_back(static_cast<double>(h.counts[k]) / decay);
    w.push_back(decay * decay / std::max(1.0, static_cast<double>(h.counts[k])));
  }
  FitOptions opts;
  opts.weights = w;
  const FitResult fit = fit_model(ModelKind::kSinusoid, t, y, opts);
  EXPECT_NEAR(fit.param("P"), 889.4, 20.0);
}

TEST(ProjectionRun, EventsStayInsideRunDuration) {
  EmitterConfig c = ideal();
  c.jitter_sigma = 200.0;
  const auto run = simulate_projection_run(c, BasisPair::parse("HH"), 1000, 72);
  EXPECT_EQ(run.xx.duration, 12500000u);
  for (const auto& e : run.x.events) EXPECT_LT(e.timestamp, run.x.duration);
  const auto empty = simulate_projection_run(c, BasisPair::parse("HH"), 0, 72);
  EXPECT_TRUE(empty.xx.events.empty());
}

TEST(AutocorrelationRun, SinglesRateMatchesClosedForm) {
  EmitterConfig c = EmitterConfig::measured_setup();
  const std::uint64_t n = 2000000;
  const auto run = simulate_autocorrelation_run(c, Species::kX, n, 73);
  const double expected = static_cast<double>(n) * c.excitation_fraction * c.detection_efficiency();
  const double got = static_cast<double>(run.a.events.size() + run.b.events.size());
  EXPECT_LT(std::abs(got - expected), 4.0 * std::sqrt(expected));
  // 80 MHz × 0.4% = 320 kcps.
  const double seconds = static_cast<double>(run.a.duration) * 1e-12;
  EXPECT_NEAR(got / seconds, 320000.0, 4.0 * std::sqrt(expected) / seconds);
}

TEST(AutocorrelationRun, ExcitonRunHasEmptyCenterPeak) {
  const auto run = simulate_autocorrelation_run(ideal(), Species::kX, 200000, 74);
  std::set<std::int64_t> pulses_a;
  for (const auto& e : run.a.events) pulses_a.insert(e.pulse);
  std::size_t same_pulse = 0;
  for (const auto& e : run.b.events) same_pulse += pulses_a.count(e.pulse);
  EXPECT_EQ(same_pulse, 0u);
  const auto a = run.a.timestamps(), b = run.b.timestamps();
  const Histogram h = cross_correlate(a, b, 100, 40000);
  // Only the tails of the neighbouring pulses reach the zero-delay window.
  EXPECT_LT(h.window_sum(-1000.0, 1000.0), 0.01 * h.window_sum(11500.0, 13500.0));
  for (int k : {-3, -2, -1, 1, 2, 3}) {
    const double side = h.window_sum(k * 12500.0 - 5000.0, k * 12500.0 + 5000.0);
    EXPECT_GT(side, 10000.0) << "peak " << k;
  }
}

TEST(AutocorrelationRun, RecaptureFillsTheCenterPeak) {
  EmitterConfig c = ideal();
  c.recapture_probability = 0.5;
  const auto run = simulate_autocorrelation_run(c, Species::kXX, 200000, 75);
  const auto a = run.a.timestamps(), b = run.b.timestamps();
  const Histogram h = cross_correlate(a, b, 100, 20000);
  EXPECT_GT(h.window_sum(-5000.0, 5000.0), 1000.0);
  // The recaptured photon always follows the first one, so the structure has
  // a dip at zero delay.
  EXPECT_LT(h.window_sum(-100.0, 100.0), h.window_sum(900.0, 1100.0));
}

TEST(StreamIo, BinaryAndCsvRoundTrip) {
  EmitterConfig c = ideal();
  c.background_rate = 1e5;
  const auto run = simulate_projection_run(c, BasisPair::parse("DA"), 5000, 76);
  for (const char* name : {"rt.ctts", "rt.csv"}) {
    export_stream(run.x, scratch(name), true);
    const auto back = import_stream(scratch(name));
    EXPECT_EQ(back.events, run.x.events) << name;
    export_stream(run.x, scratch(name), false);
    const auto stripped = import_stream(scratch(name));
    ASSERT_EQ(stripped.events.size(), run.x.events.size());
    for (std::size_t k = 0; k < stripped.events.size(); ++k) {
      EXPECT_EQ(stripped.events[k].origin, Origin::kUnknown);
      EXPECT_EQ(stripped.events[k].timestamp, run.x.events[k].timestamp);
    }
  }
}

TEST(StreamIo, EmptyStreamIsAValidFile) {
  TimestampStream empty;
  export_stream(empty, scratch("empty.ctts"));
  EXPECT_EQ(slurp(scratch("empty.ctts")).size(), 16u);
  EXPECT_TRUE(import_stream(scratch("empty.ctts")).events.empty());
  export_stream(empty, scratch("empty.csv"));
  EXPECT_TRUE(import_stream(scratch("empty.csv")).events.empty());
}

TEST(StreamIo, BinaryHeaderLayout) {
  TimestampStream s;
  s.events.push_back({1, 0x0102030405060708ull, Origin::kX, 0});
  std::ostringstream os;
  write_stream(os, s, StreamFormat::kBinary);
  const std::string bytes = os.str();
  ASSERT_EQ(bytes.size(), 16u + 9u);
  EXPECT_EQ(bytes.substr(0, 4), "CTTS");
  EXPECT_EQ(bytes[4], 1);   // version, little endian
  EXPECT_EQ(bytes[8], 1);   // record count
  EXPECT_EQ(bytes[16], 1);  // channel
  EXPECT_EQ(static_cast<unsigned char>(bytes[17]), 0x08u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[24]), 0x01u);
}

TEST(StreamIo, DecreasingTimestampsAreSortedWithWarning) {
  std::istringstream is("channel,timestamp_ps\n0,500\n1,20\n0,100\n1,30\n");
  std::vector<std::string> warnings;
  const auto s = read_stream(is, StreamFormat::kCsv, &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  std::vector<std::uint64_t> ch0;
  for (const auto& e : s.events)
    if (e.channel == 0) ch0.push_back(e.timestamp);
  EXPECT_EQ(ch0, (std::vector<std::uint64_t>{100, 500}));
}

TEST(StreamIo, MalformedFilesNameTheRecord) {
  std::istringstream csv("channel,timestamp_ps\n0,10\n0,abc\n");
  try {
    read_stream(csv, StreamFormat::kCsv);
    FAIL() << "expected a parse error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos) << e.what();
  }
  TimestampStream s;
  s.events.assign(3, PhotonEvent{0, 5, Origin::kX, 0});
  std::ostringstream os;
  write_stream(os, s, StreamFormat::kBinary);
  std::istringstream truncated(os.str().substr(0, 16 + 9 + 4));
  try {
    read_stream(truncated, StreamFormat::kBinary);
    FAIL() << "expected a parse error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos) << e.what();
  }
  std::istringstream bad_magic("XXXX0000000000000000");
  EXPECT_THROW(read_stream(bad_magic, StreamFormat::kBinary), ValidationError);
  EXPECT_THROW(import_stream(scratch("does_not_exist.ctts")), ValidationError);
}

}  // namespace
