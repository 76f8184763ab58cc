#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "cascade/histogram.hpp"
#include "cascade/polarization.hpp"
#include "cascade/quantum.hpp"

namespace cascade {

struct ProjectionRecord {
  BasisPair basis;
  std::uint64_t counts = 0;
  double weight = 1.0;  // relative integration time / efficiency
};

struct TimeBin {
  double start_ps = 0.0;
  double width_ps = 0.0;
};

struct TomographyInput {
  std::vector<ProjectionRecord> records;
  std::optional<TimeBin> time_bin;

  // 16 or 36 distinct basis pairs, positive weights.
  void validate() const;
  std::uint64_t total_counts() const;
};

// CSV `basis,counts,weight`.
TomographyInput read_tomography_csv(std::istream& is);
void write_tomography_csv(std::ostream& os, const TomographyInput& input);

// Lower-triangular T with real diagonal, 16 reals; ρ = T†T / tr(T†T).
// Layout: t[0..3] diagonal, then (re, im) pairs for entries
// (1,0), (2,1), (3,2), (2,0), (3,1), (3,0).
struct TParameterization {
  std::array<double, 16> t{};

  Matrix4c lower() const;
  DensityMatrix density() const;
  static TParameterization from_lower(const Matrix4c& T);
  // Exact factor of a physical state, also for rank-deficient ones.
  static TParameterization from_density(const DensityMatrix& rho);
};

enum class Likelihood { kGaussian, kPoisson };

struct MleOptions {
  int max_iter = 5000;
  double tol = 1e-10;
  std::uint64_t seed = 0;
  Likelihood likelihood = Likelihood::kGaussian;
  CircularConvention convention = CircularConvention::kRMinusI;
  bool record_history = false;
};

struct ReconstructionResult {
  DensityMatrix rho;
  double neg_log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;  // filled when MleOptions::record_history
};

double expected_probability(const DensityMatrix& rho, const JonesVector& xx, const JonesVector& x);
double expected_probability(const DensityMatrix& rho, const BasisPair& pair,
                            CircularConvention conv = CircularConvention::kRMinusI);

// Total pair flux estimated from every complete orthogonal quadruple
// {(a,b), (a,b⊥), (a⊥,b), (a⊥,b⊥)} present in the record set.
double estimate_pair_flux(const TomographyInput& input);

// Least-squares Pauli-coefficient solve. Hermitian, possibly not PSD.
Matrix4c linear_inversion(const TomographyInput& input,
                          CircularConvention conv = CircularConvention::kRMinusI);

double neg_log_likelihood(const DensityMatrix& rho, const TomographyInput& input,
                          Likelihood kind = Likelihood::kGaussian,
                          CircularConvention conv = CircularConvention::kRMinusI);

ReconstructionResult mle_reconstruct(const TomographyInput& input, const MleOptions& opts = {});

// Time-resolved tomography over per-basis coincidence histograms.
struct TimeBinnedOptions {
  double bin_width_ps = 100.0;
  std::uint64_t min_counts = 100;
  MleOptions mle;
};

struct BinnedReconstruction {
  TimeBin bin;
  std::uint64_t total_counts = 0;
  std::optional<ReconstructionResult> result;  // empty when the bin was skipped
};

using HistogramSet = std::map<BasisPair, Histogram>;

// Splits the histogram set into TomographyInputs, one per output bin.
std::vector<TomographyInput> split_time_bins(const HistogramSet& histograms, double bin_width_ps);

std::vector<BinnedReconstruction> time_binned_tomography(const HistogramSet& histograms,
                                                         const TimeBinnedOptions& opts);
// Single-threaded reference for the above.
std::vector<BinnedReconstruction> time_binned_tomography_serial(const HistogramSet& histograms,
                                                                const TimeBinnedOptions& opts);

enum class Metric { kFidelity, kConcurrence };

struct BootstrapResult {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> samples;  // in resample-index order, failures excluded
  int n_failed = 0;
};

// Poisson resampling of every count, MLE per resample. Resample i draws from
// an RNG seeded by (seed, i), so the result does not depend on scheduling.
BootstrapResult bootstrap_uncertainty(const TomographyInput& input, int n_resamples, Metric metric,
                                      const PureState2Q& target, std::uint64_t seed,
                                      const MleOptions& opts = {});
BootstrapResult bootstrap_uncertainty_serial(const TomographyInput& input, int n_resamples,
                                             Metric metric, const PureState2Q& target,
                                             std::uint64_t seed, const MleOptions& opts = {});

// Internal building blocks shared by the serial and parallel drivers.
namespace detail {
std::optional<double> bootstrap_sample(const TomographyInput& input, int index, Metric metric,
                                       const PureState2Q& target, std::uint64_t seed,
                                       const MleOptions& opts);
BootstrapResult summarize_bootstrap(const std::vector<std::optional<double>>& samples);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);
// Objective minimized by mle_reconstruct (negative log-likelihood divided by
// the total count) and, when `grad` is given, its analytic gradient.
double scaled_objective(const TomographyInput& input, const TParameterization& params, Likelihood kind,
                        CircularConvention conv, std::array<double, 16>* grad);
}  // namespace detail

}  // namespace cascade
