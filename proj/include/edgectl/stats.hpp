#pragma once

#include <span>
#include <vector>

namespace edgectl {

/// Tukey box statistics. Quantiles interpolate linearly between order
/// statistics at position (n - 1) * p (the "type 7" rule); whiskers are the
/// most extreme data points within 1.5 IQR of the quartiles.
struct BoxStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double lo_whisker = 0.0;
  double hi_whisker = 0.0;

  double iqr() const { return q3 - q1; }
};

/// Expects sorted input.
double quantile_sorted(std::span<const double> sorted, double p);

/// Throws std::invalid_argument on empty input.
BoxStats box_stats(std::vector<double> values);

}  // namespace edgectl
