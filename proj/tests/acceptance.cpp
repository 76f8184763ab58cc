// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "cascade/analysis.hpp"
#include "cascade/config.hpp"
#include "cascade/correlation.hpp"
#include "cascade/errors.hpp"
#include "cascade/fitting.hpp"
#include "cascade/pipeline.hpp"
#include "cascade/polarization.hpp"
#include "cascade/simulation.hpp"
#include "cascade/tomography.hpp"
#include "fit_models.hpp"
#include "oracles.hpp"

using namespace cascade;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Noiseless Φ⁺ counts, 36 projections, N = 1e6.
Outcome bell_state_oracle() {
  const Matrix4c rho = oracle::outer(PureState2Q::phi_plus().amplitudes());
  const TomographyInput in = oracle::counts_from(rho, 1e6, 36);
  const auto t0 = std::chrono::steady_clock::now();
  const ReconstructionResult r = mle_reconstruct(in);
  const double dt = seconds_since(t0);
  const double f = fidelity(r.rho, PureState2Q::phi_plus());
  const double c = concurrence(r.rho);
  return {f >= 0.9999 && c >= 0.999 && dt < 5.0,
          fmt("fidelity %.6f (>= 0.9999), concurrence %.6f (>= 0.999), %.2f s (< 5 s)", f, c, dt)};
}

// 2. |VV⟩ with Poisson noise at N = 1e4 per basis, 20 seeds, both basis sets.
Outcome calibration_replication() {
  const PureState2Q vv = PureState2Q::product(kVV);
  const Matrix4c rho = oracle::outer(vv.amplitudes());
  double worst = 1.0;
  for (int bases : {36, 16}) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      std::mt19937_64 rng(seed);
      const TomographyInput in = oracle::counts_from(rho, 1e4, bases, &rng);
      worst = std::min(worst, fidelity(mle_reconstruct(in).rho, vv));
    }
  }
  return {worst >= 0.99, fmt("minimum fidelity to |VV> over 20 seeds x {36, 16} bases: %.5f (>= 0.99)", worst)};
}

// 3 and 4 share one full pipeline run.
struct PipelineRun {
  Json report;
  double seconds = 0.0;
  std::string error;
};

const PipelineRun& reference_pipeline() {
  static const PipelineRun run = [] {
    PipelineRun out;
    const fs::path dir = fs::temp_directory_path() / "cascade_acceptance" / "closed_loop";
    fs::remove_all(dir);
    const Json cfg{{"emitter", {{"fss", 4.65}, {"tau_x", 1610.0}, {"tau_xx", 1100.0}, {"rep_rate", 80.0}}},
                   {"tomography", {{"basis_count", 36}, {"bin_width_ps", 100.0}, {"max_delay_ps", 6000.0}}},
                   {"simulation", {{"n_pulses", 1000000}, {"seed", 7}}},
                   {"io", {{"output_dir", dir.string()}}}};
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const RunConfig sim = run_config_from_json(cfg);
      cmd_simulate(sim);
      Json tomo_cfg = cfg;
      tomo_cfg["io"]["output_dir"] = (dir / "tomo").string();
      out.report = cmd_tomo(dir / "manifest.json", TomoSource::kManifest, run_config_from_json(tomo_cfg));
      out.seconds = seconds_since(t0);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    return out;
  }();
  return run;
}

Outcome fss_closed_loop() {
  const PipelineRun& run = reference_pipeline();
  if (!run.error.empty()) return {false, "pipeline failed: " + run.error};
  const Json& s = run.report.at("summary");
  if (s.at("oscillation_period_ps").is_null()) return {false, "no oscillation fit in the report"};
  const double period = s.at("oscillation_period_ps").get<double>();
  const double fmax = s.at("max_fidelity").get<double>();
  return {std::abs(period - 890.0) <= 20.0 && fmax >= 0.95 && run.seconds < 120.0,
          fmt("period %.1f ps (890 +/- 20), max fidelity %.4f (>= 0.95), %.1f s (< 120 s)", period, fmax,
              run.seconds)};
}

Outcome entanglement_persistence() {
  const PipelineRun& run = reference_pipeline();
  if (!run.error.empty()) return {false, "pipeline failed: " + run.error};
  int checked = 0;
  double worst = 1.0, worst_t = 0.0;
  for (const auto& b : run.report.at("bins")) {
    if (b.at("total_counts").get<std::uint64_t>() < 1000) continue;
    ++checked;
    const double c = b.at("concurrence").get<double>();
    if (c < worst) {
      worst = c;
      worst_t = b.at("bin_start_ps").get<double>();
    }
  }
  return {checked > 0 && worst >= 0.9,
          fmt("%d bins with >= 1000 counts, minimum concurrence %.4f at %.0f ps (>= 0.9)", checked, worst, worst_t)};
}

// 5. g² of simulated autocorrelation runs.
constexpr int kSidePeaks = 3;
constexpr std::uint64_t kAutoPulses = 1000000;
// The recapture fit scatters by ~27 ps at 1e6 pulses; evaluation runs that
// also fit t_c use 4e6 (~14 ps).
constexpr std::uint64_t kRecapturePulses = 4000000;

G2Result g2_of(const EmitterConfig& c, Species species, std::uint64_t seed, Histogram* fine = nullptr,
               std::uint64_t pulses = kAutoPulses) {
  const AutocorrelationRun run = simulate_autocorrelation_run(c, species, pulses, seed);
  const auto a = run.a.timestamps(), b = run.b.timestamps();
  const double rep = c.rep_period_ps();
  const auto reach = static_cast<std::int64_t>((kSidePeaks + 0.5) * rep);
  if (fine) *fine = cross_correlate(a, b, 20, 3000);
  return g2_zero(cross_correlate(a, b, 100, reach), rep, kSidePeaks);
}

// Secant iteration of a scalar knob onto a target g²(0), on one calibration seed.
double tune(const std::function<double(double)>& g2_at, double target, double x0, double x1, double lo, double hi) {
  double f0 = g2_at(x0) - target, f1 = g2_at(x1) - target;
  for (int i = 0; i < 12 && std::abs(f1) > 2e-4 && f1 != f0; ++i) {
    const double x2 = std::clamp(x1 - f1 * (x1 - x0) / (f1 - f0), lo, hi);
    x0 = x1, f0 = f1;
    x1 = x2, f1 = g2_at(x1) - target;
  }
  return x1;
}

Outcome g2_procedure() {
  constexpr std::uint64_t kCalibrationSeed = 1001;
  const std::uint64_t eval_seeds[] = {2001, 2002, 2003};
  std::ostringstream detail;
  bool pass = true;

  EmitterConfig x_cfg;
  const double background = tune(
      [&](double bg) {
        x_cfg.background_rate = bg;
        return g2_of(x_cfg, Species::kX, kCalibrationSeed).g2_zero;
      },
      0.024, 1e6, 3e6, 0.0, 1e9);
  x_cfg.background_rate = background;
  detail << fmt("X: background %.3g cps, g2(0) =", background);
  for (auto seed : eval_seeds) {
    const double g = g2_of(x_cfg, Species::kX, seed).g2_zero;
    pass = pass && std::abs(g - 0.024) <= 0.005;
    detail << fmt(" %.4f", g);
  }
  detail << " (0.024 +/- 0.005); ";

  EmitterConfig xx_cfg;
  const double p = tune(
      [&](double prob) {
        xx_cfg.recapture_probability = prob;
        return g2_of(xx_cfg, Species::kXX, kCalibrationSeed).g2_zero;
      },
      0.38, 0.3, 0.4, 0.0, 1.0);
  xx_cfg.recapture_probability = p;
  detail << fmt("XX: recapture probability %.4f, g2(0) =", p);
  for (auto seed : eval_seeds) {
    Histogram fine;
    const double g = g2_of(xx_cfg, Species::kXX, seed, &fine, kRecapturePulses).g2_zero;
    const double tc = fit_recapture(fine, 0.0, 3000.0).param("t_c");
    pass = pass && std::abs(g - 0.38) <= 0.03 && std::abs(tc - 546.0) <= 55.0;
    detail << fmt(" %.4f (t_c %.0f ps)", g, tc);
  }
  detail << " (0.38 +/- 0.03, t_c 546 +/- 55 ps)";
  return {pass, detail.str()};
}

// 6. Fit recovery: 50 draws per kind, noiseless and with 5% noise.
Outcome fit_recovery() {
  using namespace fit_models;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  int noiseless_bad = 0, noisy_far = 0, noisy_total = 0, inside_2sigma = 0, unconverged = 0;
  double worst_coverage = 1.0;
  for (auto k : kAllKinds) {
    int kind_inside = 0, kind_total = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const Draw d = draw(k, rng);
      FitOptions opts;
      if (k == ModelKind::kExponential) opts.init["x0"] = d.params[2];

      std::vector<double> y;
      for (double x : d.x) y.push_back(reference(k, d.params, x));
      const FitResult clean = fit_model(k, d.x, y, opts);
      unconverged += !clean.converged;
      for (std::size_t i = 0; i < d.params.size(); ++i) {
        const bool phase = k == ModelKind::kSinusoid && i == 3;
        const double tol = phase ? 1e-6 : 1e-6 * std::abs(d.params[i]);
        noiseless_bad += std::abs(clean.params[i] - d.params[i]) > tol;
      }

      double peak = 0.0;
      for (double v : y) peak = std::max(peak, std::abs(v));
      std::vector<double> noisy, w;
      for (double v : y) {
        if (k == ModelKind::kPowerLaw) {
          noisy.push_back(v * std::exp(0.05 * g(rng)));
          w.push_back(1.0 / (0.05 * 0.05));
        } else {
          const double sigma = 0.05 * (k == ModelKind::kSinusoid ? peak : std::abs(v));
          noisy.push_back(v + sigma * g(rng));
          w.push_back(1.0 / (sigma * sigma));
        }
      }
      opts.weights = w;
      const FitResult r = fit_model(k, d.x, noisy, opts);
      unconverged += !r.converged;
      for (std::size_t i = 0; i < d.params.size(); ++i) {
        if (k == ModelKind::kExponential && i == 2) continue;  // held fixed
        double diff = r.params[i] - d.params[i];
        if (k == ModelKind::kSinusoid && i == 3) diff = std::remainder(diff, 2 * oracle::kPi);
        const double z = r.std_errors[i] > 0 ? std::abs(diff) / r.std_errors[i] : 1e300;
        noisy_far += z >= 5.0;
        kind_inside += z < 2.0;
        ++kind_total;
      }
    }
    inside_2sigma += kind_inside;
    noisy_total += kind_total;
    worst_coverage = std::min(worst_coverage, static_cast<double>(kind_inside) / kind_total);
  }

  // Reference lifetimes and slopes, noiseless.
  int reference_bad = 0;
  for (double tau : {2060.0, 1100.0}) {
    std::vector<double> x, y;
    for (int i = 0; i < 150; ++i) {
      x.push_back(i * 50.0);
      y.push_back(10.0 + 5000.0 * std::exp(-x.back() / tau));
    }
    FitOptions o;
    o.init["x0"] = 0.0;
    reference_bad += std::abs(fit_model(ModelKind::kExponential, x, y, o).param("tau") - tau) > 1e-6 * tau;
  }
  for (double s : {0.78, 1.27}) {
    std::vector<double> x, y;
    for (int i = 0; i < 30; ++i) {
      x.push_back(std::pow(10.0, 2.0 * i / 29));
      y.push_back(std::exp(0.3) * std::pow(x.back(), s));
    }
    reference_bad += std::abs(fit_model(ModelKind::kPowerLaw, x, y).param("s") - s) > 1e-6 * s;
  }

  return {noiseless_bad == 0 && noisy_far == 0 && worst_coverage >= 0.85 && reference_bad == 0 && unconverged == 0,
          fmt("noiseless misses %d (1e-6 rel), noisy |z| >= 5: %d of %d, within 2 sigma %.1f%% (worst kind %.1f%%, "
              ">= 85%%), reference tau/slope misses %d, unconverged %d",
              noiseless_bad, noisy_far, noisy_total, 100.0 * inside_2sigma / noisy_total, 100.0 * worst_coverage,
              reference_bad, unconverged)};
}

// 7.
Outcome unit_conversion() {
  const double fss = fss_from_period(890.0);
  return {fss >= 4.62 && fss <= 4.67, fmt("fss_from_period(890 ps) = %.4f ueV ([4.62, 4.67])", fss)};
}

// 8.
Outcome oracle_equivalence() {
  std::mt19937_64 rng(8);
  int mismatches = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const auto na = std::uniform_int_distribution<std::size_t>(0, 1000)(rng);
    const auto nb = std::uniform_int_distribution<std::size_t>(0, 1000)(rng);
    const auto span = std::uniform_int_distribution<std::uint64_t>(1000, 2000000)(rng);
    const auto a = oracle::random_sorted_times(rng, na, span);
    const auto b = oracle::random_sorted_times(rng, nb, span);
    const auto width = std::uniform_int_distribution<std::int64_t>(1, 2000)(rng);
    const auto reach = std::uniform_int_distribution<std::int64_t>(1, 100000)(rng);
    const Histogram h = cross_correlate(a, b, width, reach);
    mismatches += h.counts != oracle::all_pairs(a, b, width, -reach, reach) || h.origin != -reach;
  }
  return {mismatches == 0, fmt("%d of 100 random instances differ from the all-pairs oracle", mismatches)};
}

// 9. Invariants across modules.
Outcome invariants() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::map<std::string, int> violations;

  for (int i = 0; i < 500; ++i) {  // normalization
    const PureState2Q psi = time_evolved_state(10.0 * u(rng), 1e4 * u(rng));
    violations["state normalization"] += std::abs(psi.amplitudes().squaredNorm() - 1.0) > 1e-12;
    const DensityMatrix rho(oracle::random_density(rng));
    double total = 0.0;
    for (const auto& bp : tomography_bases(36)) total += expected_probability(rho, bp);
    violations["projection sum"] += std::abs(total - 9.0) > 1e-9;
  }
  for (int i = 0; i < 500; ++i) {  // unitarity
    const Matrix2c w = waveplate_jones(2 * oracle::kPi * u(rng), oracle::kPi * u(rng));
    const Matrix2c c = correction_unitary({oracle::kPi * u(rng), 2 * oracle::kPi * u(rng)});
    violations["waveplate unitarity"] += !(w.adjoint() * w).isIdentity(1e-12);
    violations["correction unitarity"] += !(c.adjoint() * c).isIdentity(1e-12);
  }
  for (int i = 0; i < 100; ++i) {  // physicality
    const TomographyInput in = oracle::counts_from(oracle::random_density(rng, 1 + i % 4), 200, 36, &rng);
    violations["MLE physicality"] += !mle_reconstruct(in).rho.is_physical();
    Matrix4c m = Matrix4c::Random();
    violations["projection physicality"] += !project_physical(0.5 * (m + m.adjoint())).is_physical();
  }
  for (int i = 0; i < 200; ++i) {  // local-unitary invariance of concurrence
    const Matrix4c rho = oracle::random_density(rng, 1 + i % 4);
    const Matrix4c local = oracle::kron2(oracle::random_unitary2(rng), oracle::random_unitary2(rng));
    const double before = concurrence(DensityMatrix(rho));
    const double after = concurrence(DensityMatrix(local * rho * local.adjoint()));
    violations["concurrence local-unitary invariance"] += std::abs(before - after) > 1e-9;
  }
  {  // determinism by seed
    const EmitterConfig cfg;
    const BasisPair dd = BasisPair::parse("DD");
    const auto r1 = simulate_projection_run(cfg, dd, 20000, 5);
    const auto r2 = simulate_projection_run(cfg, dd, 20000, 5);
    violations["simulation determinism"] += r1.xx.events != r2.xx.events || r1.x.events != r2.x.events;
    const auto a1 = simulate_autocorrelation_run(cfg, Species::kX, 20000, 5);
    const auto a2 = simulate_autocorrelation_run(cfg, Species::kX, 20000, 5);
    violations["simulation determinism"] += a1.a.events != a2.a.events || a1.b.events != a2.b.events;
    const auto xs = r1.xx.timestamps(), ys = r1.x.timestamps();
    violations["correlation parallel = serial"] +=
        correlate_range(xs, ys, 100, 0, 6000).counts != correlate_range_serial(xs, ys, 100, 0, 6000).counts;
    const TomographyInput in = oracle::counts_from(oracle::random_density(rng), 1000, 16, &rng);
    const auto b1 = bootstrap_uncertainty(in, 8, Metric::kFidelity, PureState2Q::phi_plus(), 3);
    const auto b2 = bootstrap_uncertainty_serial(in, 8, Metric::kFidelity, PureState2Q::phi_plus(), 3);
    violations["bootstrap determinism"] += b1.samples != b2.samples;
  }

  int total = 0;
  std::string failing;
  for (const auto& [name, n] : violations) {
    total += n;
    if (n) failing += fmt(" %s: %d;", name.c_str(), n);
  }
  return {total == 0, fmt("%zu invariant families, %d violations", violations.size(), total) + failing};
}

}  // namespace

int main() {
  const std::pair<const char*, Outcome (*)()> criteria[] = {
      {"Bell-state oracle", bell_state_oracle},
      {"calibration replication", calibration_replication},
      {"FSS closed loop", fss_closed_loop},
      {"entanglement persistence", entanglement_persistence},
      {"g2 procedure", g2_procedure},
      {"fit recovery", fit_recovery},
      {"unit conversion", unit_conversion},
      {"oracle equivalence", oracle_equivalence},
      {"invariant suites", invariants},
  };
  int failed = 0;
  int index = 1;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", index++, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
