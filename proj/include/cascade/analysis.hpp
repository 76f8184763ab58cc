#pragma once

#include <span>
#include <string>
#include <vector>

#include "cascade/fitting.hpp"
#include "cascade/histogram.hpp"

namespace cascade {

struct G2Result {
  double g2_zero = 0.0;
  double window_delta = 0.0;  // ps, mean side-peak FWHM
  std::vector<double> side_peak_fwhm;
  std::vector<double> side_peak_centers;
  std::vector<double> side_window_sums;
  double center_window_sum = 0.0;
};

// Pulsed g²(0): Lorentzian fit to each of the n_side_peaks peaks on either
// side of zero within ±40% of the period, Δ = mean FWHM, then the zero-delay
// window sum over the mean side-peak window sum.
G2Result g2_zero(const Histogram& h, double rep_period_ps, int n_side_peaks);

struct FssEstimate {
  double fss = 0.0;  // µeV, peak-to-peak
  FitResult fit;
};

// Peak energy vs waveplate angle; the energy oscillates at
// `angular_multiplier` times the plate angle (4 for a half-wave plate).
FssEstimate fss_from_peak_positions(std::span<const double> angles_rad,
                                    std::span<const double> peak_energy_ueV,
                                    double angular_multiplier = 4.0);

double fss_from_period(double period_ps);
double period_from_fss(double fss_ueV);

struct FirstLensRate {
  double rate_mhz = 0.0;
  double fraction_of_pulses = 0.0;
};

FirstLensRate first_lens_rate(double measured_cps, double setup_eff, double detector_eff,
                              double rep_rate_mhz);

// Relative disagreement |computed - reported| / reported.
double rate_discrepancy(const FirstLensRate& computed, double reported_mhz);

// Exponential decay fit to a histogram from its maximum onwards.
FitResult fit_lifetime(const Histogram& h, double fit_window_ps = 0.0);

// Recapture model fit over [center - half_window, center + half_window).
FitResult fit_recapture(const Histogram& h, double center_ps, double half_window_ps);

// Sinusoid fit to a metric-vs-time curve; the period is P.
FitResult fit_oscillation(std::span<const double> t_ps, std::span<const double> values,
                          std::span<const double> sigmas = {});

}  // namespace cascade
