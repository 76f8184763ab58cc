#include <omp.h>

#include <algorithm>
#include <exception>

#include "cascade/errors.hpp"
#include "cascade/tomography.hpp"

namespace cascade {

std::vector<BinnedReconstruction> time_binned_tomography(const HistogramSet& histograms,
                                                         const TimeBinnedOptions& opts) {
  const auto inputs = split_time_bins(histograms, opts.bin_width_ps);
  const auto n = static_cast<long long>(inputs.size());
  const std::uint64_t threshold = std::max<std::uint64_t>(opts.min_counts, 1);
  std::vector<BinnedReconstruction> out(inputs.size());
  std::vector<std::exception_ptr> errors(inputs.size());

  #pragma omp parallel for schedule(dynamic, 1)
  for (long long k = 0; k < n; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    const auto& in = inputs[idx];
    auto& slot = out[idx];
    slot.bin = *in.time_bin;
    slot.total_counts = in.total_counts();
    try {
      if (slot.total_counts >= threshold) slot.result = mle_reconstruct(in, opts.mle);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  // Report the lowest failing bin, as the serial loop would.
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

BootstrapResult bootstrap_uncertainty(const TomographyInput& input, int n_resamples, Metric metric,
                                      const PureState2Q& target, std::uint64_t seed,
                                      const MleOptions& opts) {
  if (n_resamples < 2) throw ValidationError("bootstrap needs at least 2 resamples");
  input.validate();
  std::vector<std::optional<double>> samples(static_cast<std::size_t>(n_resamples));

  #pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n_resamples; ++i) {
    samples[static_cast<std::size_t>(i)] = detail::bootstrap_sample(input, i, metric, target, seed, opts);
  }
  return detail::summarize_bootstrap(samples);
}

}  // namespace cascade
