#include "edgectl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace edgectl {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double pos = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("box statistics of empty sample");
  std::sort(values.begin(), values.end());
  BoxStats b;
  b.median = quantile_sorted(values, 0.5);
  b.q1 = quantile_sorted(values, 0.25);
  b.q3 = quantile_sorted(values, 0.75);
  const double lo_fence = b.q1 - 1.5 * b.iqr();
  const double hi_fence = b.q3 + 1.5 * b.iqr();
  b.lo_whisker = *std::lower_bound(values.begin(), values.end(), lo_fence);
  b.hi_whisker = *(std::upper_bound(values.begin(), values.end(), hi_fence) - 1);
  b.lo_whisker = std::min(b.lo_whisker, b.q1);
  b.hi_whisker = std::max(b.hi_whisker, b.q3);
  return b;
}

}  // namespace edgectl
