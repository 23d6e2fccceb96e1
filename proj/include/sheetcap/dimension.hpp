#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sheetcap {

/// Number of cells of the eps-lattice anchored at the point cloud's lower
/// corner that contain at least one point, for each eps in `scales`.
std::vector<std::size_t> box_counts(std::span<const double> points, int d, const std::vector<double>& scales);

/// Which scales enter the fit: drop `drop_coarse` largest and `drop_fine`
/// smallest.
struct BandPolicy {
  std::size_t drop_coarse = 2;
  std::size_t drop_fine = 2;
  double min_r_squared = 0.9;
};

struct DimensionEstimate {
  std::vector<double> scales;
  std::vector<std::size_t> counts;
  std::vector<bool> in_band;
  double slope = 0.0;  ///< -d log N / d log eps on the band
  double slope_stderr = 0.0;
  double r_squared = 0.0;
  double expected = 0.0;
  bool reliable = false;  ///< r_squared >= min_r_squared
};

DimensionEstimate estimate_dimension(std::span<const double> points, int d, const std::vector<double>& scales,
                                     const BandPolicy& band = {}, double expected = 0.0);

}  // namespace sheetcap
