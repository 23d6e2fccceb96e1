#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sheetcap {

struct Interval {
  double low = 0.0;
  double high = 0.0;
  double width() const { return high - low; }
};

/// Wilson score interval for a binomial proportion (z = 1.96 by default).
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

/// Mean with standard error of the mean.
struct MeanEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;

  Interval ci(double z = 1.959963984540054) const { return {mean - z * stderr_, mean + z * stderr_}; }
};

/// Summed in index order, so the result is independent of how the values
/// were produced.
MeanEstimate mean_estimate(std::span<const double> values);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope * x. Needs n >= 2.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// n values log-spaced from lo to hi inclusive.
std::vector<double> log_space(double lo, double hi, std::size_t n);

}  // namespace sheetcap
