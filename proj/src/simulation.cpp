#include "cascade/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "cascade/errors.hpp"

namespace cascade {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("invalid emitter config: " + what);
}

class Detector {
 public:
  Detector(const EmitterConfig& c, std::mt19937_64& rng)
      : rng_(rng), jitter_(0.0, c.jitter_sigma > 0.0 ? c.jitter_sigma : 1.0),
        use_jitter_(c.jitter_sigma > 0.0), efficiency_(c.detection_efficiency()) {}

  bool survives() { return uniform_(rng_) < efficiency_; }

  // Returns false when the jittered time falls outside [0, duration).
  bool stamp(double t, std::uint64_t duration, std::uint64_t* out) {
    if (use_jitter_) t += jitter_(rng_);
    if (t < 0.0) t = 0.0;
    const double rounded = std::round(t);
    if (rounded >= static_cast<double>(duration)) return false;
    *out = static_cast<std::uint64_t>(rounded);
    return true;
  }

 private:
  std::mt19937_64& rng_;
  std::normal_distribution<double> jitter_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  bool use_jitter_;
  double efficiency_;
};

void add_background(TimestampStream& s, std::uint8_t channel, double rate_cps, std::mt19937_64& rng) {
  if (rate_cps <= 0.0 || s.duration == 0) return;
  const double expected = rate_cps * static_cast<double>(s.duration) * 1e-12;
  std::poisson_distribution<long long> count(expected);
  std::uniform_int_distribution<std::uint64_t> when(0, s.duration - 1);
  const long long n = count(rng);
  for (long long i = 0; i < n; ++i) s.events.push_back({channel, when(rng), Origin::kBackground, -1});
}

void sort_stream(TimestampStream& s) {
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const PhotonEvent& a, const PhotonEvent& b) { return a.timestamp < b.timestamp; });
}

std::uint64_t run_duration(const EmitterConfig& c, std::uint64_t n_pulses) {
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(n_pulses) * c.rep_period_ps()));
}

}  // namespace

void EmitterConfig::validate() const {
  require(std::isfinite(fss) && fss >= 0.0, "fss must be >= 0");
  require(tau_xx > 0.0, "tau_xx must be > 0");
  require(tau_x > 0.0, "tau_x must be > 0");
  require(rep_rate > 0.0, "rep_rate must be > 0");
  require(recapture_probability >= 0.0 && recapture_probability <= 1.0,
          "recapture_probability must be in [0, 1]");
  require(recapture_time > 0.0, "recapture_time must be > 0");
  require(setup_efficiency > 0.0 && setup_efficiency <= 1.0, "setup_efficiency must be in (0, 1]");
  require(detector_efficiency > 0.0 && detector_efficiency <= 1.0,
          "detector_efficiency must be in (0, 1]");
  require(background_rate >= 0.0, "background_rate must be >= 0");
  require(excitation_fraction > 0.0 && excitation_fraction <= 1.0,
          "excitation_fraction must be in (0, 1]");
  require(jitter_sigma >= 0.0, "jitter_sigma must be >= 0");
}

EmitterConfig EmitterConfig::measured_setup() {
  EmitterConfig c;
  c.setup_efficiency = 0.008;
  c.detector_efficiency = 0.5;
  return c;
}

std::vector<std::uint64_t> TimestampStream::timestamps() const {
  std::vector<std::uint64_t> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(e.timestamp);
  std::sort(out.begin(), out.end());
  return out;
}

void TimestampStream::validate() const {
  for (const auto& e : events) {
    if (e.timestamp >= duration) {
      throw ValidationError("event timestamp " + std::to_string(e.timestamp) +
                            " is not below the stream duration " + std::to_string(duration));
    }
  }
}

double ideal_pair_probability(const EmitterConfig& config, const BasisPair& pair, double delay_ps,
                              CircularConvention conv) {
  if (!(delay_ps >= 0.0)) throw ValidationError("delay must be >= 0");
  const Vector4c psi = time_evolved_state(config.fss, delay_ps).amplitudes();
  const cplx overlap = pair_state(pair, conv).dot(psi);
  return std::clamp(std::norm(overlap), 0.0, 1.0);
}

ProjectionRun simulate_projection_run(const EmitterConfig& config, const BasisPair& pair,
                                      std::uint64_t n_pulses, std::uint64_t seed,
                                      CircularConvention conv) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::exponential_distribution<double> xx_decay(1.0 / config.tau_xx);
  std::exponential_distribution<double> x_decay(1.0 / config.tau_x);
  Detector det(config, rng);

  ProjectionRun run;
  run.xx.duration = run.x.duration = run_duration(config, n_pulses);
  run.xx.config_snapshot = run.x.config_snapshot = config;

  const Vector4c s_ab = pair_state(pair, conv);
  const Vector4c s_ab_perp = pair_state(pair.with_x(orthogonal(pair.x)), conv);
  const Vector4c s_aperp_b = pair_state(pair.with_xx(orthogonal(pair.xx)), conv);
  const double period = config.rep_period_ps();

  for (std::uint64_t k = 0; k < n_pulses; ++k) {
    if (uniform(rng) >= config.excitation_fraction) continue;
    const double t_pulse = static_cast<double>(k) * period;
    const double t_xx = t_pulse + xx_decay(rng);
    const double delay = x_decay(rng);
    const double t_x = t_xx + delay;

    // Joint outcome over {a, a⊥} ⊗ {b, b⊥}; only a (XX arm) and b (X arm)
    // pass the polarizers.
    const Vector4c psi = time_evolved_state(config.fss, delay).amplitudes();
    const double p_ab = std::norm(s_ab.dot(psi));
    const double p_ab_perp = std::norm(s_ab_perp.dot(psi));
    const double p_aperp_b = std::norm(s_aperp_b.dot(psi));
    const double u = uniform(rng);
    const bool xx_passes = u < p_ab + p_ab_perp;
    const bool x_passes = u < p_ab || (u >= p_ab + p_ab_perp && u < p_ab + p_ab_perp + p_aperp_b);

    const auto pulse = static_cast<std::int64_t>(k);
    std::uint64_t ts = 0;
    if (xx_passes && det.survives() && det.stamp(t_xx, run.xx.duration, &ts)) {
      run.xx.events.push_back({kChannelXX, ts, Origin::kXX, pulse});
    }
    if (x_passes && det.survives() && det.stamp(t_x, run.x.duration, &ts)) {
      run.x.events.push_back({kChannelX, ts, Origin::kX, pulse});
    }
  }
  add_background(run.xx, kChannelXX, config.background_rate, rng);
  add_background(run.x, kChannelX, config.background_rate, rng);
  sort_stream(run.xx);
  sort_stream(run.x);
  return run;
}

AutocorrelationRun simulate_autocorrelation_run(const EmitterConfig& config, Species species,
                                                std::uint64_t n_pulses, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::exponential_distribution<double> xx_decay(1.0 / config.tau_xx);
  std::exponential_distribution<double> x_decay(1.0 / config.tau_x);
  // Capture delay chosen so that capture + XX decay has density
  // ∝ exp(-t/tau_xx)·(1 - exp(-t/recapture_time)).
  const double capture_mean = 1.0 / (1.0 / config.recapture_time + 1.0 / config.tau_xx);
  std::exponential_distribution<double> capture(1.0 / capture_mean);
  Detector det(config, rng);

  AutocorrelationRun run;
  run.a.duration = run.b.duration = run_duration(config, n_pulses);
  run.a.config_snapshot = run.b.config_snapshot = config;
  const double period = config.rep_period_ps();
  const Origin origin = species == Species::kX ? Origin::kX : Origin::kXX;

  auto emit = [&](double t, std::int64_t pulse) {
    if (!det.survives()) return;
    const bool to_a = uniform(rng) < 0.5;
    TimestampStream& s = to_a ? run.a : run.b;
    std::uint64_t ts = 0;
    if (det.stamp(t, s.duration, &ts)) s.events.push_back({to_a ? kChannelA : kChannelB, ts, origin, pulse});
  };

  for (std::uint64_t k = 0; k < n_pulses; ++k) {
    if (uniform(rng) >= config.excitation_fraction) continue;
    const auto pulse = static_cast<std::int64_t>(k);
    const double t_xx = static_cast<double>(k) * period + xx_decay(rng);
    if (species == Species::kX) {
      emit(t_xx + x_decay(rng), pulse);
      continue;
    }
    emit(t_xx, pulse);
    if (config.recapture_probability > 0.0 && uniform(rng) < config.recapture_probability) {
      emit(t_xx + capture(rng) + xx_decay(rng), pulse);
    }
  }
  add_background(run.a, kChannelA, config.background_rate, rng);
  add_background(run.b, kChannelB, config.background_rate, rng);
  sort_stream(run.a);
  sort_stream(run.b);
  return run;
}

}  // namespace cascade
