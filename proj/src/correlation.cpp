#include "cascade/correlation.hpp"

#include <omp.h>

#include <algorithm>
#include <iostream>
#include <vector>

#include "cascade/errors.hpp"

namespace cascade {

namespace {

Histogram empty_histogram(std::int64_t bin_width, std::int64_t min_delay, std::int64_t max_delay) {
  if (bin_width <= 0) throw ValidationError("correlation bin width must be positive");
  if (max_delay <= min_delay) throw ValidationError("correlation window is empty");
  const std::int64_t span = max_delay - min_delay;
  const auto n_bins = static_cast<std::size_t>((span + bin_width - 1) / bin_width);
  return Histogram(static_cast<double>(bin_width), static_cast<double>(min_delay), n_bins);
}

void check_sorted(std::span<const std::uint64_t> s) {
  if (!std::is_sorted(s.begin(), s.end())) throw ValidationError("timestamp stream must be sorted");
}

// Sweeps a[begin, end) against b. lo is the first b index that can pair with a[begin].
void sweep(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b, std::size_t begin,
           std::size_t end, std::int64_t bin_width, std::int64_t min_delay, std::int64_t upper,
           std::vector<std::uint64_t>& counts) {
  const auto n_bins = static_cast<std::int64_t>(counts.size());
  std::size_t lo = 0;
  if (begin < end) {
    const std::int64_t first = static_cast<std::int64_t>(a[begin]) + min_delay;
    lo = static_cast<std::size_t>(
        std::lower_bound(b.begin(), b.end(), static_cast<std::uint64_t>(std::max<std::int64_t>(first, 0))) -
        b.begin());
  }
  for (std::size_t i = begin; i < end; ++i) {
    const auto ta = static_cast<std::int64_t>(a[i]);
    while (lo < b.size() && static_cast<std::int64_t>(b[lo]) - ta < min_delay) ++lo;
    for (std::size_t j = lo; j < b.size(); ++j) {
      const std::int64_t d = static_cast<std::int64_t>(b[j]) - ta;
      if (d >= upper) break;
      const std::int64_t k = (d - min_delay) / bin_width;
      if (k < n_bins) ++counts[static_cast<std::size_t>(k)];
    }
  }
}

void warn_if_empty(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.empty() || b.empty()) std::clog << "warning: cross-correlation of an empty stream\n";
}

}  // namespace

Histogram correlate_range_serial(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                                 std::int64_t bin_width, std::int64_t min_delay,
                                 std::int64_t max_delay) {
  Histogram h = empty_histogram(bin_width, min_delay, max_delay);
  check_sorted(a);
  check_sorted(b);
  warn_if_empty(a, b);
  const std::int64_t upper = min_delay + static_cast<std::int64_t>(h.size()) * bin_width;
  sweep(a, b, 0, a.size(), bin_width, min_delay, upper, h.counts);
  return h;
}

Histogram correlate_range(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                          std::int64_t bin_width, std::int64_t min_delay, std::int64_t max_delay) {
  Histogram h = empty_histogram(bin_width, min_delay, max_delay);
  check_sorted(a);
  check_sorted(b);
  warn_if_empty(a, b);
  const std::int64_t upper = min_delay + static_cast<std::int64_t>(h.size()) * bin_width;
  const std::size_t n_bins = h.size();
  const auto n = static_cast<long long>(a.size());

  #pragma omp parallel
  {
    std::vector<std::uint64_t> local(n_bins, 0);
    const long long threads = omp_get_num_threads();
    const long long tid = omp_get_thread_num();
    const auto begin = static_cast<std::size_t>(n * tid / threads);
    const auto end = static_cast<std::size_t>(n * (tid + 1) / threads);
    sweep(a, b, begin, end, bin_width, min_delay, upper, local);
    #pragma omp critical(cascade_correlate_merge)
    for (std::size_t k = 0; k < n_bins; ++k) h.counts[k] += local[k];
  }
  return h;
}

Histogram cross_correlate(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                          std::int64_t bin_width, std::int64_t max_delay) {
  if (max_delay <= 0) throw ValidationError("max_delay must be positive");
  return correlate_range(a, b, bin_width, -max_delay, max_delay);
}

Histogram cross_correlate_serial(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                                 std::int64_t bin_width, std::int64_t max_delay) {
  if (max_delay <= 0) throw ValidationError("max_delay must be positive");
  return correlate_range_serial(a, b, bin_width, -max_delay, max_delay);
}

}  // namespace cascade
