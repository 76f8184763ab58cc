#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cascade {

// exponential: y = B + A·exp(-(x - x0)/tau)            (x0 held fixed)
// sinusoid:    y = y0 + A·sin(2πx/P + phi0)
// recapture:   y = C + A·exp(-|x - t0|/t_d)·(1 - exp(-|x - t0|/t_c))
// power_law:   log y = s·log x + b
// lorentzian:  y = B + A·(gamma/2)² / ((x - x0)² + (gamma/2)²)
enum class ModelKind { kExponential, kSinusoid, kRecapture, kPowerLaw, kLorentzian };

std::string to_string(ModelKind kind);
ModelKind model_from_string(std::string_view name);
std::vector<std::string> parameter_names(ModelKind kind);

struct FitResult {
  std::string model;
  std::vector<std::string> names;
  std::vector<double> params;
  std::vector<double> std_errors;
  double reduced_chi2 = 0.0;
  bool converged = false;
  int iterations = 0;

  double param(std::string_view name) const;
  double error(std::string_view name) const;
};

struct FitOptions {
  std::optional<std::vector<double>> weights;  // 1/σ²; model default when absent
  std::map<std::string, double> init;          // overrides the automatic start
  std::set<std::string> fixed;                 // parameters held at their start value
  int max_iter = 2000;
  double tol = 1e-13;
};

// Weighted Levenberg–Marquardt (power_law: weighted linear regression in
// log–log space). Count-like models (exponential, recapture, lorentzian)
// default to Poisson weights 1/max(y, 1); the others to uniform weights.
// Standard errors come from the covariance scaled by reduced χ².
FitResult fit_model(ModelKind kind, std::span<const double> x, std::span<const double> y,
                    const FitOptions& opts = {});

// Model evaluation with named parameters in parameter_names() order.
double evaluate_model(ModelKind kind, std::span<const double> params, double x);

// Period minimizing the residual of a linear sinusoid fit, scanned on a log
// grid between the Nyquist period and twice the x span.
double scan_period(std::span<const double> x, std::span<const double> y,
                   std::span<const double> weights = {});

}  // namespace cascade
