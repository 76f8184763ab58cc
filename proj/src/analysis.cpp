#include "cascade/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cascade/constants.hpp"
#include "cascade/errors.hpp"

namespace cascade {

namespace {

constexpr double kSideWindowFraction = 0.4;

std::string peak_label(int k) { return (k > 0 ? "+" : "") + std::to_string(k); }

}  // namespace

G2Result g2_zero(const Histogram& h, double rep_period_ps, int n_side_peaks) {
  h.validate();
  if (!(rep_period_ps > 0.0)) throw ValidationError("repetition period must be positive");
  if (n_side_peaks < 1) throw ValidationError("need at least one side peak on each side");
  const double reach = (n_side_peaks + kSideWindowFraction) * rep_period_ps;
  if (h.origin > -reach || h.end() < reach) {
    throw ValidationError("histogram does not span " + std::to_string(n_side_peaks) +
                          " repetition periods on each side of zero");
  }

  G2Result out;
  for (int side = -n_side_peaks; side <= n_side_peaks; ++side) {
    if (side == 0) continue;
    const double nominal = side * rep_period_ps;
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < h.size(); ++k) {
      const double c = h.bin_center(k);
      if (std::abs(c - nominal) <= kSideWindowFraction * rep_period_ps) {
        xs.push_back(c);
        ys.push_back(static_cast<double>(h.counts[k]));
      }
    }
    FitResult fit;
    try {
      FitOptions opts;
      opts.init["x0"] = nominal;
      fit = fit_model(ModelKind::kLorentzian, xs, ys, opts);
    } catch (const std::exception& e) {
      throw ComputationError("Lorentzian fit of side peak " + peak_label(side) + " failed: " + e.what());
    }
    const double fwhm = fit.param("gamma");
    const double center = fit.param("x0");
    if (!fit.converged || !(fwhm > 0.0) || !(fit.param("A") > 0.0) ||
        std::abs(center - nominal) > kSideWindowFraction * rep_period_ps) {
      throw ComputationError("Lorentzian fit of side peak " + peak_label(side) + " failed");
    }
    out.side_peak_fwhm.push_back(fwhm);
    out.side_peak_centers.push_back(center);
  }
  double delta = 0.0;
  for (double f : out.side_peak_fwhm) delta += f;
  delta /= static_cast<double>(out.side_peak_fwhm.size());
  out.window_delta = delta;

  double side_mean = 0.0;
  for (double c : out.side_peak_centers) {
    const double s = h.window_sum(c - delta / 2.0, c + delta / 2.0);
    out.side_window_sums.push_back(s);
    side_mean += s;
  }
  side_mean /= static_cast<double>(out.side_window_sums.size());
  if (!(side_mean > 0.0)) throw ComputationError("side-peak windows contain no counts");
  out.center_window_sum = h.window_sum(-delta / 2.0, delta / 2.0);
  out.g2_zero = out.center_window_sum / side_mean;
  return out;
}

FssEstimate fss_from_peak_positions(std::span<const double> angles, std::span<const double> energies,
                                    double angular_multiplier) {
  if (angles.size() != energies.size()) throw ValidationError("angles and energies differ in length");
  if (angles.size() < 8) throw ValidationError("FSS fit needs at least 8 samples");
  if (!(angular_multiplier > 0.0)) throw ValidationError("angular multiplier must be positive");
  const auto [lo, hi] = std::minmax_element(angles.begin(), angles.end());
  const double period = 2.0 * std::numbers::pi / angular_multiplier;
  if (*hi - *lo < period * (1.0 - 1e-9)) {
    throw ValidationError("insufficient angular coverage: samples must span one oscillation period");
  }
  FitOptions opts;
  opts.init["P"] = period;
  opts.fixed.insert("P");
  FssEstimate out;
  out.fit = fit_model(ModelKind::kSinusoid, angles, energies, opts);
  out.fss = 2.0 * std::abs(out.fit.param("A"));
  return out;
}

double fss_from_period(double period_ps) {
  if (!(period_ps > 0.0)) throw ValidationError("period must be positive");
  return PhysicalConstants::h / period_ps;
}

double period_from_fss(double fss_ueV) {
  if (!(fss_ueV > 0.0)) throw ValidationError("fss must be positive");
  return PhysicalConstants::h / fss_ueV;
}

FirstLensRate first_lens_rate(double measured_cps, double setup_eff, double detector_eff,
                              double rep_rate_mhz) {
  if (!(setup_eff > 0.0) || !(detector_eff > 0.0)) throw ValidationError("efficiencies must be > 0");
  if (setup_eff > 1.0 || detector_eff > 1.0) throw ValidationError("efficiencies must be <= 1");
  if (!(measured_cps > 0.0)) throw ValidationError("measured rate must be > 0");
  if (!(rep_rate_mhz > 0.0)) throw ValidationError("repetition rate must be > 0");
  FirstLensRate r;
  r.rate_mhz = measured_cps / (setup_eff * detector_eff) * 1e-6;
  r.fraction_of_pulses = r.rate_mhz / rep_rate_mhz;
  return r;
}

double rate_discrepancy(const FirstLensRate& computed, double reported_mhz) {
  if (!(reported_mhz > 0.0)) throw ValidationError("reported rate must be > 0");
  return std::abs(computed.rate_mhz - reported_mhz) / reported_mhz;
}

FitResult fit_lifetime(const Histogram& h, double fit_window_ps) {
  h.validate();
  const auto peak = static_cast<std::size_t>(
      std::max_element(h.counts.begin(), h.counts.end()) - h.counts.begin());
  std::vector<double> xs, ys;
  const double start = h.bin_center(peak);
  for (std::size_t k = peak; k < h.size(); ++k) {
    if (fit_window_ps > 0.0 && h.bin_center(k) - start > fit_window_ps) break;
    xs.push_back(h.bin_center(k));
    ys.push_back(static_cast<double>(h.counts[k]));
  }
  FitOptions opts;
  opts.init["x0"] = start;
  return fit_model(ModelKind::kExponential, xs, ys, opts);
}

FitResult fit_recapture(const Histogram& h, double center_ps, double half_window_ps) {
  h.validate();
  if (!(half_window_ps > 0.0)) throw ValidationError("recapture window must be positive");
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double c = h.bin_center(k);
    if (c >= center_ps - half_window_ps && c < center_ps + half_window_ps) {
      xs.push_back(c);
      ys.push_back(static_cast<double>(h.counts[k]));
    }
  }
  FitOptions opts;
  opts.init["t0"] = center_ps;
  return fit_model(ModelKind::kRecapture, xs, ys, opts);
}

FitResult fit_oscillation(std::span<const double> t, std::span<const double> values,
                          std::span<const double> sigmas) {
  FitOptions opts;
  if (!sigmas.empty()) {
    if (sigmas.size() != values.size()) throw ValidationError("sigmas and values differ in length");
    std::vector<double> w;
    for (double s : sigmas) w.push_back(s > 0.0 ? 1.0 / (s * s) : 0.0);
    opts.weights = w;
  }
  return fit_model(ModelKind::kSinusoid, t, values, opts);
}

}  // namespace cascade
