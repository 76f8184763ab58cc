#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace cascade {

// Uniformly binned counts; bin k covers [origin + k·bin_width, origin + (k+1)·bin_width).
struct Histogram {
  double bin_width = 1.0;  // ps
  double origin = 0.0;     // ps
  std::vector<std::uint64_t> counts;

  Histogram() = default;
  Histogram(double width, double start, std::size_t n_bins)
      : bin_width(width), origin(start), counts(n_bins, 0) {}

  std::size_t size() const { return counts.size(); }
  double bin_start(std::size_t k) const { return origin + static_cast<double>(k) * bin_width; }
  double bin_center(std::size_t k) const { return bin_start(k) + 0.5 * bin_width; }
  double end() const { return bin_start(counts.size()); }
  std::uint64_t total() const;

  void validate() const;
  bool same_binning(const Histogram& other) const;

  // Sums groups of `factor` adjacent bins; a trailing partial group is kept.
  Histogram rebinned(std::size_t factor) const;

  // Sum of counts in [lo, hi), splitting partially covered bins by overlap.
  double window_sum(double lo, double hi) const;

  Histogram& operator+=(const Histogram& other);
};

// CSV `bin_start_ps,counts`.
void write_histogram_csv(std::ostream& os, const Histogram& h);
Histogram read_histogram_csv(std::istream& is);

}  // namespace cascade
