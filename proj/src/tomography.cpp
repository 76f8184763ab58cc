#include "cascade/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/QR>

#include "cascade/errors.hpp"

namespace cascade {

namespace {

constexpr double kProbabilityFloor = 1e-12;

// (row, col) of the complex off-diagonal entries in parameter order.
constexpr std::array<std::pair<int, int>, 6> kOffDiagonal = {
    {{1, 0}, {2, 1}, {3, 2}, {2, 0}, {3, 1}, {3, 0}}};

const std::array<Matrix2c, 4>& paulis() {
  static const std::array<Matrix2c, 4> p = [] {
    std::array<Matrix2c, 4> out;
    out[0] << 1, 0, 0, 1;
    out[1] << 0, 1, 1, 0;
    out[2] << 0, cplx(0, -1), cplx(0, 1), 0;
    out[3] << 1, 0, 0, -1;
    return out;
  }();
  return p;
}

struct PreparedRecord {
  Vector4c state;
  double counts;
  double norm;  // N_ν
};

std::vector<PreparedRecord> prepare(const TomographyInput& input, CircularConvention conv) {
  const double flux = estimate_pair_flux(input);
  std::vector<PreparedRecord> out;
  out.reserve(input.records.size());
  for (const auto& r : input.records) {
    out.push_back({pair_state(r.basis, conv), static_cast<double>(r.counts), flux * r.weight});
  }
  return out;
}

double born(const Matrix4c& a, const Vector4c& s) {
  return (s.adjoint() * a * s)(0, 0).real();
}

double term_value(Likelihood kind, double norm, double p, double n) {
  const double mu = norm * std::max(p, kProbabilityFloor);
  if (kind == Likelihood::kGaussian) return (mu - n) * (mu - n) / (2.0 * mu);
  return mu - (n > 0.0 ? n * std::log(mu) : 0.0);
}

// dL/dp for one projection; zero below the probability floor.
double term_slope(Likelihood kind, double norm, double p, double n) {
  if (p < kProbabilityFloor) return 0.0;
  if (kind == Likelihood::kGaussian) {
    const double mu = norm * p;
    return (mu * mu - n * n) / (2.0 * norm * p * p);
  }
  return norm - n / p;
}

// Scaled objective and its gradient with respect to the 16 T parameters.
class Objective {
 public:
  Objective(std::vector<PreparedRecord> records, Likelihood kind)
      : records_(std::move(records)), kind_(kind) {
    double total = 0.0;
    for (const auto& r : records_) total += r.counts;
    scale_ = 1.0 / std::max(total, 1.0);
  }

  double scale() const { return scale_; }

  double value_of(const Matrix4c& rho) const {
    double sum = 0.0;
    for (const auto& r : records_) sum += term_value(kind_, r.norm, born(rho, r.state), r.counts);
    return sum;
  }

  double operator()(const TParameterization& params, std::array<double, 16>* grad) const {
    const Matrix4c T = params.lower();
    const Matrix4c A = T.adjoint() * T;
    const double tr = A.trace().real();
    if (!(tr > 0.0) || !std::isfinite(tr)) {
      if (grad) grad->fill(0.0);
      return std::numeric_limits<double>::infinity();
    }
    double f = 0.0;
    Matrix4c G = Matrix4c::Zero();
    for (const auto& r : records_) {
      const double p = born(A, r.state) / tr;
      f += term_value(kind_, r.norm, p, r.counts);
      if (grad) {
        const double g = term_slope(kind_, r.norm, p, r.counts);
        if (g != 0.0) {
          G += g * (r.state * r.state.adjoint());
          G.diagonal().array() -= g * p;
        }
      }
    }
    if (grad) {
      G *= scale_ / tr;
      const Matrix4c GT = G * T.adjoint();
      auto& out = *grad;
      for (int i = 0; i < 4; ++i) out[i] = 2.0 * GT(i, i).real();
      for (std::size_t k = 0; k < kOffDiagonal.size(); ++k) {
        const auto [row, col] = kOffDiagonal[k];
        out[4 + 2 * k] = 2.0 * GT(col, row).real();
        out[5 + 2 * k] = -2.0 * GT(col, row).imag();
      }
    }
    return f * scale_;
  }

 private:
  std::vector<PreparedRecord> records_;
  Likelihood kind_;
  double scale_ = 1.0;
};

using Vec16 = Eigen::Matrix<double, 16, 1>;
using Mat16 = Eigen::Matrix<double, 16, 16>;

Vec16 to_vec(const std::array<double, 16>& a) { return Eigen::Map<const Vec16>(a.data()); }
TParameterization to_params(const Vec16& v) {
  TParameterization p;
  Eigen::Map<Vec16>(p.t.data()) = v;
  return p;
}

struct BfgsOutcome {
  TParameterization params;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

BfgsOutcome minimize_bfgs(const Objective& obj, const TParameterization& start, const MleOptions& opts,
                          std::vector<double>* history) {
  constexpr double kStallGradient = 1e-6;
  constexpr double kArmijo = 1e-4;

  Vec16 x = to_vec(start.t);
  std::array<double, 16> g_arr{};
  double f = obj(start, &g_arr);
  Vec16 g = to_vec(g_arr);
  Mat16 H = Mat16::Identity();
  bool fresh_hessian = true;
  if (history) history->push_back(f);

  BfgsOutcome out{start, f, 0, false};
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    out.iterations = iter;
    if (g.norm() < opts.tol) {
      out.converged = true;
      break;
    }
    Vec16 dir = -H * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      H.setIdentity();
      fresh_hessian = true;
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    bool accepted = false;
    Vec16 x_new;
    double f_new = f;
    std::array<double, 16> g_new_arr{};
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      f_new = obj(to_params(x_new), &g_new_arr);
      if (std::isfinite(f_new) && f_new <= f + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || f_new >= f) {
      if (!fresh_hessian) {
        H.setIdentity();
        fresh_hessian = true;
        continue;
      }
      // Machine-precision stall.
      out.converged = g.norm() < kStallGradient;
      break;
    }
    const Vec16 g_new = to_vec(g_new_arr);
    const Vec16 s = x_new - x;
    const Vec16 y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      if (fresh_hessian) H *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Mat16 I = Mat16::Identity();
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
      fresh_hessian = false;
    }
    x = x_new;
    g = g_new;
    f = f_new;
    if (history) history->push_back(f);
    out.iterations = iter + 1;
  }
  if (!out.converged && g.norm() < opts.tol) out.converged = true;
  out.params = to_params(x);
  out.value = f;
  return out;
}

}  // namespace

void TomographyInput::validate() const {
  if (records.size() != 16 && records.size() != 36) {
    throw ValidationError("tomography input must have 16 or 36 projections, got " +
                          std::to_string(records.size()));
  }
  std::set<BasisPair> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.basis).second) {
      throw ValidationError("duplicate basis pair " + r.basis.label());
    }
    if (!(r.weight > 0.0) || !std::isfinite(r.weight)) {
      throw ValidationError("acquisition weight for " + r.basis.label() + " must be positive");
    }
  }
  if (time_bin && !(time_bin->width_ps > 0.0)) throw ValidationError("time bin width must be positive");
}

std::uint64_t TomographyInput::total_counts() const {
  std::uint64_t total = 0;
  for (const auto& r : records) total += r.counts;
  return total;
}

TomographyInput read_tomography_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("basis,counts", 0) != 0) {
    throw ValidationError("tomography CSV must start with header 'basis,counts,weight'");
  }
  TomographyInput input;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string basis, counts, weight;
    std::getline(ls, basis, ',');
    std::getline(ls, counts, ',');
    std::getline(ls, weight, ',');
    try {
      ProjectionRecord r;
      r.basis = BasisPair::parse(basis);
      std::size_t used = 0;
      const long long c = std::stoll(counts, &used);
      if (c < 0 || used != counts.size()) throw ValidationError("bad count");
      r.counts = static_cast<std::uint64_t>(c);
      r.weight = weight.empty() ? 1.0 : std::stod(weight);
      input.records.push_back(r);
    } catch (const std::exception& e) {
      throw ValidationError("malformed tomography CSV at line " + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
  input.validate();
  return input;
}

void write_tomography_csv(std::ostream& os, const TomographyInput& input) {
  os << "basis,counts,weight\n";
  for (const auto& r : input.records) os << r.basis.label() << ',' << r.counts << ',' << r.weight << '\n';
}

Matrix4c TParameterization::lower() const {
  Matrix4c T = Matrix4c::Zero();
  for (int i = 0; i < 4; ++i) T(i, i) = t[i];
  for (std::size_t k = 0; k < kOffDiagonal.size(); ++k) {
    const auto [row, col] = kOffDiagonal[k];
    T(row, col) = cplx(t[4 + 2 * k], t[5 + 2 * k]);
  }
  return T;
}

DensityMatrix TParameterization::density() const {
  const Matrix4c T = lower();
  Matrix4c a = T.adjoint() * T;
  const double tr = a.trace().real();
  if (!(tr > 0.0)) throw ComputationError("T parameterization has zero trace");
  a /= tr;
  return DensityMatrix(0.5 * (a + a.adjoint()));
}

TParameterization TParameterization::from_lower(const Matrix4c& T) {
  TParameterization p;
  for (int i = 0; i < 4; ++i) p.t[i] = T(i, i).real();
  for (std::size_t k = 0; k < kOffDiagonal.size(); ++k) {
    const auto [row, col] = kOffDiagonal[k];
    p.t[4 + 2 * k] = T(row, col).real();
    p.t[5 + 2 * k] = T(row, col).imag();
  }
  return p;
}

TParameterization TParameterization::from_density(const DensityMatrix& rho) {
  // Reversal J maps lower- to upper-triangular. With JρJ = R†R (R upper,
  // from QR of an eigen square root), T = JRJ is lower and T†T = ρ.
  Matrix4c J = Matrix4c::Zero();
  for (int i = 0; i < 4; ++i) J(i, 3 - i) = 1.0;
  const Matrix4c m = J * rho.matrix() * J;
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(0.5 * (m + m.adjoint()));
  const Eigen::Vector4d w = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix4c B = es.eigenvectors() * w.cast<cplx>().asDiagonal();
  Eigen::HouseholderQR<Matrix4c> qr(B.adjoint());
  Matrix4c R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 4; ++i) {
    const double mag = std::abs(R(i, i));
    if (mag > 0.0) R.row(i) *= std::conj(R(i, i)) / mag;
  }
  return from_lower(J * R * J);
}

double expected_probability(const DensityMatrix& rho, const JonesVector& xx, const JonesVector& x) {
  const Vector2c a = xx.components(), b = x.components();
  const Vector4c s(a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1));
  return std::clamp(born(rho.matrix(), s), 0.0, 1.0);
}

double expected_probability(const DensityMatrix& rho, const BasisPair& pair, CircularConvention conv) {
  return expected_probability(rho, projector_for(pair.xx, conv), projector_for(pair.x, conv));
}

double estimate_pair_flux(const TomographyInput& input) {
  std::map<BasisPair, const ProjectionRecord*> by_basis;
  for (const auto& r : input.records) by_basis[r.basis] = &r;
  double sum = 0.0;
  int groups = 0;
  std::set<BasisPair> used;
  for (const auto& r : input.records) {
    // Canonical member of the quadruple: the first label of each orthogonal pair.
    auto canon = [](Polarization p) {
      const Polarization q = orthogonal(p);
      return static_cast<int>(p) < static_cast<int>(q) ? p : q;
    };
    const BasisPair base{canon(r.basis.xx), canon(r.basis.x)};
    if (used.count(base)) continue;
    const std::array<BasisPair, 4> quad = {base, base.with_x(orthogonal(base.x)),
                                           base.with_xx(orthogonal(base.xx)),
                                           BasisPair{orthogonal(base.xx), orthogonal(base.x)}};
    double group = 0.0;
    bool complete = true;
    for (const auto& q : quad) {
      auto it = by_basis.find(q);
      if (it == by_basis.end()) {
        complete = false;
        break;
      }
      group += static_cast<double>(it->second->counts) / it->second->weight;
    }
    if (!complete) continue;
    used.insert(base);
    sum += group;
    ++groups;
  }
  if (groups == 0) {
    throw ValidationError("no complete orthogonal basis quadruple; cannot normalize counts");
  }
  return sum / groups;
}

Matrix4c linear_inversion(const TomographyInput& input, CircularConvention conv) {
  input.validate();
  if (input.total_counts() == 0) throw ValidationError("tomography input has zero total counts");
  const double flux = estimate_pair_flux(input);
  if (!(flux > 0.0)) throw ValidationError("estimated pair flux is zero");

  const auto& sigma = paulis();
  const int n = static_cast<int>(input.records.size());
  Eigen::MatrixXd B(n, 16);
  Eigen::VectorXd p(n);
  for (int v = 0; v < n; ++v) {
    const auto& r = input.records[static_cast<std::size_t>(v)];
    const Matrix4c P = pair_projector(r.basis, conv);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) B(v, 4 * i + j) = (P * kron(sigma[i], sigma[j])).trace().real() / 4.0;
    p(v) = static_cast<double>(r.counts) / (flux * r.weight);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
  qr.setThreshold(1e-10);
  if (qr.rank() < 16) {
    throw ComputationError("linear inversion is singular: projection set is not tomographically complete");
  }
  const Eigen::VectorXd c = qr.solve(p);
  Matrix4c rho = Matrix4c::Zero();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) rho += c(4 * i + j) * kron(sigma[i], sigma[j]) / 4.0;
  return 0.5 * (rho + rho.adjoint());
}

double neg_log_likelihood(const DensityMatrix& rho, const TomographyInput& input, Likelihood kind,
                          CircularConvention conv) {
  const Objective obj(prepare(input, conv), kind);
  return obj.value_of(rho.matrix());
}

ReconstructionResult mle_reconstruct(const TomographyInput& input, const MleOptions& opts) {
  input.validate();
  if (input.total_counts() == 0) throw ValidationError("tomography input has zero total counts");
  const Objective obj(prepare(input, opts.convention), opts.likelihood);

  DensityMatrix seed_state;
  try {
    seed_state = project_physical(linear_inversion(input, opts.convention));
  } catch (const ValidationError&) {
    seed_state = DensityMatrix::maximally_mixed();
  }
  const double seed_value = obj.value_of(seed_state.matrix()) * obj.scale();

  // Rank-deficient starts sit on a manifold the gradient cannot leave, so
  // start from a slightly mixed version of the seed.
  constexpr double kMix = 1e-3;
  auto start_from = [&](const Matrix4c& mixer) {
    return TParameterization::from_density(
        DensityMatrix((1.0 - kMix) * seed_state.matrix() + kMix * mixer));
  };

  ReconstructionResult result;
  std::vector<double>* history = opts.record_history ? &result.objective_history : nullptr;
  BfgsOutcome best = minimize_bfgs(obj, start_from(Matrix4c::Identity() / 4.0), opts, history);
  result.iterations = best.iterations;

  // Restarts from seeded random mixers when the first run did not converge.
  std::mt19937_64 rng(detail::mix_seed(opts.seed, 0x7f4a7c15ULL));
  std::normal_distribution<double> normal;
  for (int restart = 0; restart < 2 && !best.converged; ++restart) {
    Matrix4c g;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) g(i, j) = cplx(normal(rng), normal(rng));
    Matrix4c mixer = g * g.adjoint();
    mixer /= mixer.trace().real();
    BfgsOutcome next = minimize_bfgs(obj, start_from(mixer), opts, nullptr);
    result.iterations += next.iterations;
    if (next.converged || next.value < best.value) best = next;
  }

  if (best.value <= seed_value) {
    result.rho = best.params.density();
    result.neg_log_likelihood = best.value / obj.scale();
  } else {
    result.rho = seed_state;
    result.neg_log_likelihood = seed_value / obj.scale();
  }
  result.converged = best.converged;
  return result;
}

std::vector<TomographyInput> split_time_bins(const HistogramSet& histograms, double bin_width_ps) {
  if (histograms.size() < 16) {
    throw ValidationError("time-binned tomography needs at least 16 basis pairs, got " +
                          std::to_string(histograms.size()));
  }
  if (!(bin_width_ps > 0.0)) throw ValidationError("time bin width must be positive");
  const Histogram& ref = histograms.begin()->second;
  ref.validate();
  for (const auto& [pair, h] : histograms) {
    h.validate();
    if (!h.same_binning(ref)) {
      throw ValidationError("histogram for " + pair.label() + " has inconsistent binning");
    }
  }
  const double ratio = bin_width_ps / ref.bin_width;
  const auto factor = static_cast<std::size_t>(std::llround(ratio));
  if (factor == 0 || std::abs(ratio - static_cast<double>(factor)) > 1e-9 * ratio) {
    throw ValidationError("time bin width must be an integer multiple of the histogram bin width");
  }
  std::map<BasisPair, Histogram> coarse;
  for (const auto& [pair, h] : histograms) coarse.emplace(pair, h.rebinned(factor));
  const std::size_t n_bins = coarse.begin()->second.size();

  std::vector<TomographyInput> out(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    out[k].time_bin = TimeBin{coarse.begin()->second.bin_start(k), coarse.begin()->second.bin_width};
    for (const auto& [pair, h] : coarse) out[k].records.push_back({pair, h.counts[k], 1.0});
  }
  return out;
}

namespace detail {

double scaled_objective(const TomographyInput& input, const TParameterization& params, Likelihood kind,
                        CircularConvention conv, std::array<double, 16>* grad) {
  input.validate();
  return Objective(prepare(input, conv), kind)(params, grad);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::optional<double> bootstrap_sample(const TomographyInput& input, int index, Metric metric,
                                       const PureState2Q& target, std::uint64_t seed,
                                       const MleOptions& opts) {
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(index)));
  TomographyInput resampled = input;
  for (auto& r : resampled.records) {
    if (r.counts == 0) continue;
    std::poisson_distribution<long long> pois(static_cast<double>(r.counts));
    r.counts = static_cast<std::uint64_t>(pois(rng));
  }
  try {
    if (resampled.total_counts() == 0) return std::nullopt;
    const ReconstructionResult res = mle_reconstruct(resampled, opts);
    if (!res.converged) return std::nullopt;
    return metric == Metric::kFidelity ? fidelity(res.rho, target) : concurrence(res.rho);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

BootstrapResult summarize_bootstrap(const std::vector<std::optional<double>>& samples) {
  BootstrapResult out;
  for (const auto& s : samples) {
    if (s) {
      out.samples.push_back(*s);
    } else {
      ++out.n_failed;
    }
  }
  const auto n = out.samples.size();
  if (n == 0) throw ComputationError("every bootstrap resample failed");
  double mean = 0.0;
  for (double v : out.samples) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : out.samples) var += (v - mean) * (v - mean);
  out.mean = mean;
  out.std = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
  return out;
}

}  // namespace detail

BootstrapResult bootstrap_uncertainty_serial(const TomographyInput& input, int n_resamples,
                                             Metric metric, const PureState2Q& target,
                                             std::uint64_t seed, const MleOptions& opts) {
  if (n_resamples < 2) throw ValidationError("bootstrap needs at least 2 resamples");
  input.validate();
  std::vector<std::optional<double>> samples(static_cast<std::size_t>(n_resamples));
  for (int i = 0; i < n_resamples; ++i) {
    samples[static_cast<std::size_t>(i)] = detail::bootstrap_sample(input, i, metric, target, seed, opts);
  }
  return detail::summarize_bootstrap(samples);
}

std::vector<BinnedReconstruction> time_binned_tomography_serial(const HistogramSet& histograms,
                                                                const TimeBinnedOptions& opts) {
  const auto inputs = split_time_bins(histograms, opts.bin_width_ps);
  std::vector<BinnedReconstruction> out(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    out[k].bin = *inputs[k].time_bin;
    out[k].total_counts = inputs[k].total_counts();
    if (out[k].total_counts >= std::max<std::uint64_t>(opts.min_counts, 1)) {
      out[k].result = mle_reconstruct(inputs[k], opts.mle);
    }
  }
  return out;
}

}  // namespace cascade
