#include "cascade/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "cascade/errors.hpp"

namespace cascade {

namespace {

using std::numbers::pi;

bool counts_like(ModelKind kind) {
  return kind == ModelKind::kExponential || kind == ModelKind::kRecapture ||
         kind == ModelKind::kLorentzian;
}

bool params_valid(ModelKind kind, const Eigen::VectorXd& p) {
  if (!p.allFinite()) return false;
  switch (kind) {
    case ModelKind::kExponential: return p(3) > 0.0;
    case ModelKind::kSinusoid: return p(2) > 0.0;
    case ModelKind::kRecapture: return p(3) > 0.0 && p(4) > 0.0;
    case ModelKind::kLorentzian: return p(3) > 0.0;
    case ModelKind::kPowerLaw: return true;
  }
  return false;
}

// Value and, when grad is non-null, the gradient with respect to every
// parameter.
double model(ModelKind kind, const double* p, double x, double* grad) {
  switch (kind) {
    case ModelKind::kExponential: {
      const double B = p[0], A = p[1], x0 = p[2], tau = p[3];
      const double e = std::exp(-(x - x0) / tau);
      if (grad) {
        grad[0] = 1.0;
        grad[1] = e;
        grad[2] = A * e / tau;
        grad[3] = A * e * (x - x0) / (tau * tau);
      }
      return B + A * e;
    }
    case ModelKind::kSinusoid: {
      const double y0 = p[0], A = p[1], P = p[2], phi = p[3];
      const double arg = 2.0 * pi * x / P + phi;
      const double s = std::sin(arg), c = std::cos(arg);
      if (grad) {
        grad[0] = 1.0;
        grad[1] = s;
        grad[2] = -A * c * 2.0 * pi * x / (P * P);
        grad[3] = A * c;
      }
      return y0 + A * s;
    }
    case ModelKind::kRecapture: {
      const double C = p[0], A = p[1], t0 = p[2], td = p[3], tc = p[4];
      const double u = std::abs(x - t0);
      const double ed = std::exp(-u / td), ec = std::exp(-u / tc);
      const double shape = ed * (1.0 - ec);
      if (grad) {
        const double dshape_du = -shape / td + ed * ec / tc;
        const double sign = x > t0 ? 1.0 : (x < t0 ? -1.0 : 0.0);
        grad[0] = 1.0;
        grad[1] = shape;
        grad[2] = -A * dshape_du * sign;
        grad[3] = A * ed * (u / (td * td)) * (1.0 - ec);
        grad[4] = -A * ed * ec * u / (tc * tc);
      }
      return C + A * shape;
    }
    case ModelKind::kLorentzian: {
      const double B = p[0], A = p[1], x0 = p[2], gamma = p[3];
      const double h = 0.5 * gamma, dx = x - x0;
      const double den = dx * dx + h * h;
      const double L = h * h / den;
      if (grad) {
        grad[0] = 1.0;
        grad[1] = L;
        grad[2] = A * h * h * 2.0 * dx / (den * den);
        grad[3] = 0.5 * A * 2.0 * h * dx * dx / (den * den);
      }
      return B + A * L;
    }
    case ModelKind::kPowerLaw: {
      const double s = p[0], b = p[1];
      const double lx = std::log(x);
      if (grad) {
        grad[0] = lx;
        grad[1] = 1.0;
      }
      return s * lx + b;
    }
  }
  return 0.0;
}

// Weighted linear least squares on the given columns; returns χ².
double linear_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                  Eigen::VectorXd* coef) {
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd Xw = sw.asDiagonal() * X;
  const Eigen::VectorXd yw = sw.cwiseProduct(y);
  *coef = Xw.colPivHouseholderQr().solve(yw);
  return (Xw * *coef - yw).squaredNorm();
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
  return out;
}

double min_spacing(const Eigen::VectorXd& x) {
  std::vector<double> s(x.data(), x.data() + x.size());
  std::sort(s.begin(), s.end());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] > s[i - 1]) best = std::min(best, s[i] - s[i - 1]);
  return std::isfinite(best) ? best : 1.0;
}

Eigen::VectorXd auto_init(ModelKind kind, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& w, const FitOptions& opts) {
  const double span = x.maxCoeff() - x.minCoeff();
  const double dx = min_spacing(x);
  const auto n = x.size();
  auto given = [&](const char* name) -> std::optional<double> {
    auto it = opts.init.find(name);
    if (it == opts.init.end()) return std::nullopt;
    return it->second;
  };
  Eigen::VectorXd coef;
  switch (kind) {
    case ModelKind::kExponential: {
      const double x0 = given("x0").value_or(x.minCoeff());
      double best = std::numeric_limits<double>::infinity();
      Eigen::Vector4d p(0, 0, x0, span);
      for (double tau : log_grid(std::max(dx, span / 500.0), span * 10.0, 400)) {
        Eigen::MatrixXd X(n, 2);
        X.col(0).setOnes();
        X.col(1) = (-(x.array() - x0) / tau).exp().matrix();
        const double chi2 = linear_fit(X, y, w, &coef);
        if (chi2 < best) {
          best = chi2;
          p << coef(0), coef(1), x0, tau;
        }
      }
      return p;
    }
    case ModelKind::kSinusoid: {
      const double period = given("P").value_or(scan_period(
          std::span<const double>(x.data(), static_cast<std::size_t>(n)),
          std::span<const double>(y.data(), static_cast<std::size_t>(n)),
          std::span<const double>(w.data(), static_cast<std::size_t>(n))));
      Eigen::MatrixXd X(n, 3);
      X.col(0).setOnes();
      X.col(1) = (2.0 * pi * x.array() / period).sin().matrix();
      X.col(2) = (2.0 * pi * x.array() / period).cos().matrix();
      linear_fit(X, y, w, &coef);
      return Eigen::Vector4d(coef(0), std::hypot(coef(1), coef(2)), period, std::atan2(coef(2), coef(1)));
    }
    case ModelKind::kLorentzian: {
      Eigen::Index imax = 0;
      y.maxCoeff(&imax);
      const double x0 = given("x0").value_or(x(imax));
      double best = std::numeric_limits<double>::infinity();
      Eigen::Vector4d p(y.minCoeff(), y.maxCoeff() - y.minCoeff(), x0, span / 4.0);
      for (double gamma : log_grid(dx / 2.0, span * 2.0, 300)) {
        const double h = gamma / 2.0;
        Eigen::MatrixXd X(n, 2);
        X.col(0).setOnes();
        X.col(1) = (h * h / ((x.array() - x0).square() + h * h)).matrix();
        const double chi2 = linear_fit(X, y, w, &coef);
        if (chi2 < best) {
          best = chi2;
          p << coef(0), coef(1), x0, gamma;
        }
      }
      return p;
    }
    case ModelKind::kRecapture: {
      const Eigen::VectorXd excess = (y.array() - y.minCoeff()).matrix();
      const double mass = excess.sum();
      const double t0 = given("t0").value_or(mass > 0.0 ? x.dot(excess) / mass : x.mean());
      double best = std::numeric_limits<double>::infinity();
      Eigen::VectorXd p(5);
      p << y.minCoeff(), y.maxCoeff() - y.minCoeff(), t0, span / 4.0, span / 8.0;
      const auto grid = log_grid(std::max(dx / 2.0, span / 1000.0), span * 2.0, 60);
      const Eigen::ArrayXd u = (x.array() - t0).abs();
      for (double td : grid) {
        const Eigen::ArrayXd ed = (-u / td).exp();
        for (double tc : grid) {
          Eigen::MatrixXd X(n, 2);
          X.col(0).setOnes();
          X.col(1) = (ed * (1.0 - (-u / tc).exp())).matrix();
          const double chi2 = linear_fit(X, y, w, &coef);
          if (chi2 < best) {
            best = chi2;
            p << coef(0), coef(1), t0, td, tc;
          }
        }
      }
      return p;
    }
    case ModelKind::kPowerLaw:
      break;
  }
  return Eigen::VectorXd::Zero(2);
}

void canonicalize(ModelKind kind, Eigen::VectorXd& p) {
  if (kind == ModelKind::kSinusoid) {
    if (p(1) < 0.0) {
      p(1) = -p(1);
      p(3) += pi;
    }
    p(3) = std::remainder(p(3), 2.0 * pi);
    if (p(3) >= pi) p(3) -= 2.0 * pi;
  }
  if (kind == ModelKind::kLorentzian) p(3) = std::abs(p(3));  // enters only as gamma²
}

FitResult fit_power_law(std::span<const double> x, std::span<const double> y, const FitOptions& opts) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd ly(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(x[static_cast<std::size_t>(i)] > 0.0) || !(y[static_cast<std::size_t>(i)] > 0.0)) {
      throw ValidationError("power-law fit needs strictly positive x and y");
    }
    X(i, 0) = std::log(x[static_cast<std::size_t>(i)]);
    X(i, 1) = 1.0;
    ly(i) = std::log(y[static_cast<std::size_t>(i)]);
    w(i) = opts.weights ? (*opts.weights)[static_cast<std::size_t>(i)] : 1.0;
  }
  Eigen::VectorXd coef;
  const double chi2 = linear_fit(X, ly, w, &coef);
  const double dof = static_cast<double>(n - 2);
  const Eigen::Matrix2d info = X.transpose() * w.asDiagonal() * X;
  const Eigen::Matrix2d cov = info.inverse() * (chi2 / dof);
  FitResult r;
  r.model = to_string(ModelKind::kPowerLaw);
  r.names = parameter_names(ModelKind::kPowerLaw);
  r.params = {coef(0), coef(1)};
  r.std_errors = {std::sqrt(std::max(cov(0, 0), 0.0)), std::sqrt(std::max(cov(1, 1), 0.0))};
  r.reduced_chi2 = chi2 / dof;
  r.converged = true;
  r.iterations = 1;
  return r;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kExponential: return "exponential";
    case ModelKind::kSinusoid: return "sinusoid";
    case ModelKind::kRecapture: return "recapture";
    case ModelKind::kPowerLaw: return "power_law";
    case ModelKind::kLorentzian: return "lorentzian";
  }
  return "unknown";
}

ModelKind model_from_string(std::string_view name) {
  if (name == "exponential") return ModelKind::kExponential;
  if (name == "sinusoid") return ModelKind::kSinusoid;
  if (name == "recapture") return ModelKind::kRecapture;
  if (name == "power_law") return ModelKind::kPowerLaw;
  if (name == "lorentzian") return ModelKind::kLorentzian;
  throw ValidationError("unknown fit model '" + std::string(name) + "'");
}

std::vector<std::string> parameter_names(ModelKind kind) {
  switch (kind) {
    case ModelKind::kExponential: return {"B", "A", "x0", "tau"};
    case ModelKind::kSinusoid: return {"y0", "A", "P", "phi0"};
    case ModelKind::kRecapture: return {"C", "A", "t0", "t_d", "t_c"};
    case ModelKind::kPowerLaw: return {"s", "b"};
    case ModelKind::kLorentzian: return {"B", "A", "x0", "gamma"};
  }
  return {};
}

double FitResult::param(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return params[i];
  throw ValidationError("fit result has no parameter '" + std::string(name) + "'");
}

double FitResult::error(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return std_errors[i];
  throw ValidationError("fit result has no parameter '" + std::string(name) + "'");
}

double evaluate_model(ModelKind kind, std::span<const double> params, double x) {
  if (params.size() != parameter_names(kind).size()) {
    throw ValidationError("wrong number of parameters for model " + to_string(kind));
  }
  if (kind == ModelKind::kPowerLaw) return std::exp(model(kind, params.data(), x, nullptr));
  return model(kind, params.data(), x, nullptr);
}

double scan_period(std::span<const double> xs, std::span<const double> ys, std::span<const double> ws) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  if (n < 4) throw ValidationError("period scan needs at least 4 samples");
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(xs.data(), n);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), n);
  const Eigen::VectorXd w =
      ws.empty() ? Eigen::VectorXd::Ones(n) : Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(ws.data(), n));
  const double span = x.maxCoeff() - x.minCoeff();
  if (!(span > 0.0)) throw ValidationError("period scan needs distinct x values");
  double best = std::numeric_limits<double>::infinity();
  double best_period = span;
  Eigen::VectorXd coef;
  Eigen::MatrixXd X(n, 3);
  X.col(0).setOnes();
  // Frequency grid fine enough that adjacent trials differ by < 1/8 cycle
  // across the span.
  const double f_lo = 1.0 / (2.0 * span), f_hi = 1.0 / (2.0 * min_spacing(x));
  const int steps = std::clamp(static_cast<int>((f_hi - f_lo) * span * 8.0), 64, 20000);
  for (int i = 0; i <= steps; ++i) {
    const double f = f_lo + (f_hi - f_lo) * i / steps;
    X.col(1) = (2.0 * pi * f * x.array()).sin().matrix();
    X.col(2) = (2.0 * pi * f * x.array()).cos().matrix();
    const double chi2 = linear_fit(X, y, w, &coef);
    if (chi2 < best) {
      best = chi2;
      best_period = 1.0 / f;
    }
  }
  return best_period;
}

FitResult fit_model(ModelKind kind, std::span<const double> xs, std::span<const double> ys,
                    const FitOptions& opts) {
  const auto names = parameter_names(kind);
  const auto n_params = names.size();
  if (xs.size() != ys.size()) throw ValidationError("x and y must have the same length");
  if (opts.weights && opts.weights->size() != xs.size()) {
    throw ValidationError("weights must have the same length as x");
  }
  const std::size_t n_fixed_by_model = kind == ModelKind::kExponential ? 1 : 0;
  if (xs.size() < n_params - n_fixed_by_model + 1) {
    throw ValidationError("need at least " + std::to_string(n_params - n_fixed_by_model + 1) +
                          " points to fit " + to_string(kind));
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw ValidationError("fit data must be finite");
  }
  if (std::all_of(xs.begin(), xs.end(), [&](double v) { return v == xs.front(); })) {
    throw ValidationError("degenerate fit: all x values are equal");
  }
  for (const auto& [name, value] : opts.init) {
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw ValidationError("unknown initial parameter '" + name + "' for " + to_string(kind));
    }
  }
  if (kind == ModelKind::kPowerLaw) return fit_power_law(xs, ys, opts);

  const auto n = static_cast<Eigen::Index>(xs.size());
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(xs.data(), n);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), n);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (opts.weights) {
      w(i) = (*opts.weights)[static_cast<std::size_t>(i)];
    } else {
      w(i) = counts_like(kind) ? 1.0 / std::max(y(i), 1.0) : 1.0;
    }
    if (!(w(i) >= 0.0)) throw ValidationError("fit weights must be nonnegative");
  }

  Eigen::VectorXd p = auto_init(kind, x, y, w, opts);
  for (const auto& [name, value] : opts.init) {
    p(std::find(names.begin(), names.end(), name) - names.begin()) = value;
  }
  std::vector<Eigen::Index> free;
  for (std::size_t i = 0; i < n_params; ++i) {
    const bool fixed = opts.fixed.count(names[i]) > 0 || (kind == ModelKind::kExponential && names[i] == "x0");
    if (!fixed) free.push_back(static_cast<Eigen::Index>(i));
  }
  const auto m = static_cast<Eigen::Index>(free.size());
  if (n <= m) throw ValidationError("not enough points for the free parameters");
  if (!params_valid(kind, p)) throw ComputationError("invalid starting parameters for " + to_string(kind));

  auto evaluate = [&](const Eigen::VectorXd& q, Eigen::VectorXd* resid, Eigen::MatrixXd* jac) {
    std::vector<double> grad(n_params);
    double chi2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double f = model(kind, q.data(), x(i), jac ? grad.data() : nullptr);
      const double r = y(i) - f;
      if (resid) (*resid)(i) = r;
      if (jac)
        for (Eigen::Index k = 0; k < m; ++k) (*jac)(i, k) = grad[static_cast<std::size_t>(free[static_cast<std::size_t>(k)])];
      chi2 += w(i) * r * r;
    }
    return chi2;
  };

  Eigen::VectorXd resid(n);
  Eigen::MatrixXd J(n, m);
  double chi2 = evaluate(p, &resid, &J);
  const double scale = std::max((w.array() * y.array().square()).sum(), 1e-300);
  double lambda = 1e-3;
  bool converged = false;
  int iter = 0;
  for (; iter < opts.max_iter && !converged; ++iter) {
    const Eigen::MatrixXd JtW = J.transpose() * w.asDiagonal();
    const Eigen::MatrixXd info = JtW * J;
    const Eigen::VectorXd grad = JtW * resid;
    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd damped = info;
      for (Eigen::Index k = 0; k < m; ++k) damped(k, k) += lambda * std::max(info(k, k), 1e-300);
      const Eigen::VectorXd step = damped.ldlt().solve(grad);
      Eigen::VectorXd trial = p;
      for (Eigen::Index k = 0; k < m; ++k) trial(free[static_cast<std::size_t>(k)]) += step(k);
      double trial_chi2 = std::numeric_limits<double>::infinity();
      if (step.allFinite() && params_valid(kind, trial)) trial_chi2 = evaluate(trial, nullptr, nullptr);
      if (trial_chi2 <= chi2) {
        double rel_step = 0.0;
        for (Eigen::Index k = 0; k < m; ++k) {
          const auto idx = free[static_cast<std::size_t>(k)];
          rel_step = std::max(rel_step, std::abs(step(k)) / (std::abs(p(idx)) + 1e-12));
        }
        const double drop = chi2 - trial_chi2;
        p = trial;
        chi2 = evaluate(p, &resid, &J);
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (rel_step < 1e-12 || chi2 <= 1e-30 * scale || (drop <= opts.tol * chi2 && rel_step < 1e-8)) {
          converged = true;
        }
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          // No downhill step at any damping: stationary point.
          converged = true;
          break;
        }
      }
    }
  }
  canonicalize(kind, p);
  chi2 = evaluate(p, &resid, &J);

  FitResult r;
  r.model = to_string(kind);
  r.names = names;
  r.params.assign(p.data(), p.data() + p.size());
  r.std_errors.assign(n_params, 0.0);
  const double dof = static_cast<double>(n - m);
  r.reduced_chi2 = chi2 / dof;
  const Eigen::MatrixXd info = J.transpose() * w.asDiagonal() * J;
  const Eigen::MatrixXd cov = info.completeOrthogonalDecomposition().pseudoInverse() * r.reduced_chi2;
  for (Eigen::Index k = 0; k < m; ++k) {
    r.std_errors[static_cast<std::size_t>(free[static_cast<std::size_t>(k)])] = std::sqrt(std::max(cov(k, k), 0.0));
  }
  r.converged = converged;
  r.iterations = iter;
  return r;
}

}  // namespace cascade
