#include "cascade/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "cascade/errors.hpp"

namespace cascade {

std::uint64_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

void Histogram::validate() const {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) {
    throw ValidationError("histogram bin width must be positive");
  }
  if (!std::isfinite(origin)) throw ValidationError("histogram origin must be finite");
  if (counts.empty()) throw ValidationError("histogram must have at least one bin");
}

bool Histogram::same_binning(const Histogram& other) const {
  return bin_width == other.bin_width && origin == other.origin &&
         counts.size() == other.counts.size();
}

Histogram Histogram::rebinned(std::size_t factor) const {
  if (factor == 0) throw ValidationError("rebin factor must be positive");
  Histogram out(bin_width * static_cast<double>(factor), origin,
                (counts.size() + factor - 1) / factor);
  for (std::size_t k = 0; k < counts.size(); ++k) out.counts[k / factor] += counts[k];
  return out;
}

double Histogram::window_sum(double lo, double hi) const {
  if (hi <= lo || counts.empty()) return 0.0;
  const double first = std::floor((lo - origin) / bin_width);
  const double last = std::ceil((hi - origin) / bin_width);
  const auto k0 = static_cast<long long>(std::max(first, 0.0));
  const auto k1 = std::min(static_cast<long long>(last), static_cast<long long>(counts.size()));
  double sum = 0.0;
  for (long long k = k0; k < k1; ++k) {
    const double a = bin_start(static_cast<std::size_t>(k));
    const double b = a + bin_width;
    const double overlap = std::min(b, hi) - std::max(a, lo);
    if (overlap > 0.0) sum += static_cast<double>(counts[static_cast<std::size_t>(k)]) * overlap / bin_width;
  }
  return sum;
}

Histogram& Histogram::operator+=(const Histogram& other) {
  if (!same_binning(other)) throw ValidationError("cannot merge histograms with different binning");
  for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += other.counts[k];
  return *this;
}

void write_histogram_csv(std::ostream& os, const Histogram& h) {
  os << "bin_start_ps,counts\n";
  os << std::setprecision(17);
  for (std::size_t k = 0; k < h.size(); ++k) os << h.bin_start(k) << ',' << h.counts[k] << '\n';
}

Histogram read_histogram_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("histogram CSV is empty");
  if (line.rfind("bin_start_ps,counts", 0) != 0) {
    throw ValidationError("histogram CSV must start with header 'bin_start_ps,counts'");
  }
  std::vector<double> starts;
  Histogram h;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    double start = 0.0;
    char comma = 0;
    long long c = -1;
    if (!(ls >> start >> comma >> c) || comma != ',' || c < 0) {
      throw ValidationError("malformed histogram CSV at line " + std::to_string(line_no));
    }
    starts.push_back(start);
    h.counts.push_back(static_cast<std::uint64_t>(c));
  }
  if (starts.empty()) throw ValidationError("histogram CSV has no bins");
  h.origin = starts.front();
  h.bin_width = starts.size() > 1 ? starts[1] - starts[0] : 1.0;
  for (std::size_t k = 1; k < starts.size(); ++k) {
    const double expected = h.origin + static_cast<double>(k) * h.bin_width;
    if (std::abs(starts[k] - expected) > 1e-6 * std::max(1.0, std::abs(expected))) {
      throw ValidationError("histogram CSV bins are not uniform at line " + std::to_string(k + 2));
    }
  }
  h.validate();
  return h;
}

}  // namespace cascade
