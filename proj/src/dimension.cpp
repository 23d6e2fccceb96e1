#include "sheetcap/dimension.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sheetcap/stats.hpp"

namespace sheetcap {

namespace {

std::int64_t cell(double v, double lower, double eps) {
  return static_cast<std::int64_t>(std::floor((v - lower) / eps));
}

std::size_t count_one(std::span<const double> points, std::size_t d, const std::vector<double>& lower, double eps) {
  const std::size_t n = points.size() / d;
  std::vector<std::int64_t> top(d, 0);
  for (std::size_t i = 0; i < points.size(); ++i)
    top[i % d] = std::max(top[i % d], cell(points[i], lower[i % d], eps));

  // Pack the cell coordinates into one word when they fit; otherwise sort
  // the coordinate tuples.
  int bits = 0;
  std::vector<int> width(d);
  for (std::size_t k = 0; k < d; ++k) {
    width[k] = 1;
    while ((std::int64_t{1} << width[k]) <= top[k]) ++width[k];
    bits += width[k];
  }
  if (bits <= 64) {
    std::vector<std::uint64_t> packed(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t v = 0;
      for (std::size_t k = 0; k < d; ++k)
        v = (v << width[k]) | static_cast<std::uint64_t>(cell(points[i * d + k], lower[k], eps));
      packed[i] = v;
    }
    std::sort(packed.begin(), packed.end());
    return static_cast<std::size_t>(std::unique(packed.begin(), packed.end()) - packed.begin());
  }

  std::vector<std::int64_t> keys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) keys[i] = cell(points[i], lower[i % d], eps);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) { return keys.begin() + static_cast<std::ptrdiff_t>(i * d); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(key(a), key(a) + static_cast<std::ptrdiff_t>(d), key(b),
                                        key(b) + static_cast<std::ptrdiff_t>(d));
  });
  std::size_t count = n ? 1 : 0;
  for (std::size_t i = 1; i < n; ++i)
    if (!std::equal(key(order[i - 1]), key(order[i - 1]) + static_cast<std::ptrdiff_t>(d), key(order[i]))) ++count;
  return count;
}

}  // namespace

std::vector<std::size_t> box_counts(std::span<const double> points, int d, const std::vector<double>& scales) {
  if (d < 1 || points.size() % static_cast<std::size_t>(d) != 0) throw std::invalid_argument("box counts: ragged points");
  if (points.empty()) throw std::invalid_argument("box counts: no points");
  for (double s : scales)
    if (!(s > 0.0)) throw std::invalid_argument("box counts: scales must be > 0");
  const auto ud = static_cast<std::size_t>(d);
  std::vector<double> lower(ud, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < points.size(); ++i) lower[i % ud] = std::min(lower[i % ud], points[i]);
  std::vector<std::size_t> out(scales.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t s = 0; s < scales.size(); ++s) out[s] = count_one(points, ud, lower, scales[s]);
  return out;
}

DimensionEstimate estimate_dimension(std::span<const double> points, int d, const std::vector<double>& scales,
                                     const BandPolicy& band, double expected) {
  DimensionEstimate est;
  est.scales = scales;
  est.expected = expected;
  est.counts = box_counts(points, d, scales);

  std::vector<std::size_t> by_size(scales.size());
  std::iota(by_size.begin(), by_size.end(), 0);
  std::sort(by_size.begin(), by_size.end(), [&](std::size_t a, std::size_t b) { return scales[a] > scales[b]; });
  est.in_band.assign(scales.size(), false);
  if (band.drop_coarse + band.drop_fine + 2 > scales.size())
    throw std::invalid_argument("dimension: fewer than 2 scales left in the band");
  std::vector<double> x, y;
  for (std::size_t r = band.drop_coarse; r + band.drop_fine < scales.size(); ++r) {
    const std::size_t i = by_size[r];
    est.in_band[i] = true;
    x.push_back(-std::log(scales[i]));
    y.push_back(std::log(static_cast<double>(est.counts[i])));
  }
  const LineFit f = fit_line(x, y);
  est.slope = f.slope;
  est.slope_stderr = f.slope_stderr;
  est.r_squared = f.r_squared;
  est.reliable = f.r_squared >= band.min_r_squared;
  return est;
}

}  // namespace sheetcap
