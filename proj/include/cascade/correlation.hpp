#pragma once

#include <cstdint>
#include <span>

#include "cascade/histogram.hpp"

namespace cascade {

// Histogram of delays t_b - t_a over [min_delay, max_delay), bins of
// bin_width starting at min_delay. Bins are all full width: when the span is
// not a multiple of bin_width the last bin reaches past max_delay. Both inputs must be sorted ascending.
// Partitions stream_a across OpenMP threads and merges partial histograms.
Histogram correlate_range(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                          std::int64_t bin_width, std::int64_t min_delay, std::int64_t max_delay);

// Single-threaded two-pointer sweep; reference for the parallel kernel.
Histogram correlate_range_serial(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                                 std::int64_t bin_width, std::int64_t min_delay,
                                 std::int64_t max_delay);

// Symmetric window [-max_delay, +max_delay).
Histogram cross_correlate(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                          std::int64_t bin_width, std::int64_t max_delay);
Histogram cross_correlate_serial(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                                 std::int64_t bin_width, std::int64_t max_delay);

}  // namespace cascade
