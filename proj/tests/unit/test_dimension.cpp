#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "sheetcap/dimension.hpp"
#include "sheetcap/stats.hpp"

using namespace sheetcap;

namespace {

std::vector<double> segment(std::size_t n) {
  std::vector<double> p;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    p.push_back(0.3 * t);
    p.push_back(0.4 * t);
  }
  return p;
}

std::vector<double> square(std::size_t side) {
  std::vector<double> p;
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      p.push_back((static_cast<double>(i) + 0.5) / static_cast<double>(side));
      p.push_back((static_cast<double>(j) + 0.5) / static_cast<double>(side));
    }
  return p;
}

}  // namespace

TEST_SUITE("dimension") {
  TEST_CASE("box counts of simple sets") {
    std::vector<double> line;
    for (int i = 0; i < 10000; ++i) line.push_back(i / 9999.0);
    CHECK(box_counts(line, 1, {1.0 / 32.0})[0] == doctest::Approx(32).epsilon(2.0 / 32.0));
    CHECK(box_counts(square(100), 2, {0.1})[0] == 100);
    CHECK(box_counts(std::vector<double>{1.0, 2.0, 3.0}, 3, {0.01})[0] == 1);
    CHECK_THROWS_AS(box_counts(std::vector<double>{1.0, 2.0, 3.0}, 2, {0.1}), std::invalid_argument);
    CHECK_THROWS_AS(box_counts(line, 1, {0.0}), std::invalid_argument);
  }

  TEST_CASE("halving the scale multiplies counts by at most 2^d") {
    oracle::Gen gen(101);
    for (int trial = 0; trial < 30; ++trial) {
      const int d = gen.integer(1, 4);
      std::vector<double> pts;
      const int n = gen.integer(1, 2000);
      for (int i = 0; i < n * d; ++i) pts.push_back(gen.uniform(-2.0, 2.0));
      const double eps = gen.uniform(0.01, 1.0);
      const auto c = box_counts(pts, d, {eps, eps / 2.0});
      CHECK(c[1] <= (std::size_t{1} << d) * c[0]);
      CHECK(c[1] >= c[0]);
    }
  }

  TEST_CASE("counts do not increase with the scale") {
    oracle::Gen gen(102);
    std::vector<double> pts;
    for (int i = 0; i < 3000; ++i) pts.push_back(gen.normal());
    const auto scales = log_space(1e-3, 1.0, 15);
    const auto c = box_counts(pts, 3, scales);
    for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i] <= c[i - 1]);
  }

  TEST_CASE("segment and square have slopes one and two") {
    const auto seg = estimate_dimension(segment(100000), 2, log_space(1.0 / 1024.0, 1.0 / 8.0, 8), {}, 1.0);
    CHECK(seg.slope == doctest::Approx(1.0).epsilon(0.1));
    CHECK(seg.reliable);
    const auto sq = estimate_dimension(square(1024), 2, log_space(1.0 / 256.0, 1.0 / 4.0, 8), {}, 2.0);
    CHECK(sq.slope == doctest::Approx(2.0).epsilon(0.1));
    CHECK(sq.reliable);
    std::size_t band = 0;
    for (bool b : sq.in_band) band += b;
    CHECK(band == 4);
  }

  TEST_CASE("uniform cube cloud recovers its dimension at unsaturated scales") {
    oracle::Gen gen(103);
    std::vector<double> pts;
    for (int i = 0; i < 3 * 400000; ++i) pts.push_back(gen.uniform(0.0, 1.0));
    // dyadic scales tile the unit cube exactly; other scales leave partial boundary cells
    const auto est = estimate_dimension(pts, 3, log_space(1.0 / 64.0, 1.0, 7), {}, 3.0);
    CHECK(est.slope == doctest::Approx(3.0).epsilon(0.1));
  }

  TEST_CASE("translation and scale covariance") {
    oracle::Gen gen(104);
    std::vector<double> pts;
    for (int i = 0; i < 2 * 5000; ++i) pts.push_back(gen.normal());
    const auto scales = log_space(0.01, 1.0, 9);
    const auto base = box_counts(pts, 2, scales);
    auto shifted = pts;
    for (double& v : shifted) v += 17.0;
    // the lattice is anchored at the lower corner, so shifts leave counts alone
    CHECK(box_counts(shifted, 2, scales) == base);
    auto doubled = pts;
    for (double& v : doubled) v *= 2.0;
    std::vector<double> doubled_scales;
    for (double s : scales) doubled_scales.push_back(2.0 * s);
    CHECK(box_counts(doubled, 2, doubled_scales) == base);
  }

  TEST_CASE("saturated counts are flagged unreliable") {
    const std::vector<double> two{0.0, 0.0, 1.0, 1.0};
    const auto est = estimate_dimension(two, 2, log_space(1e-4, 10.0, 12), BandPolicy{0, 0, 0.9});
    CHECK_FALSE(est.reliable);
    CHECK_THROWS_AS(estimate_dimension(two, 2, {0.1, 0.2, 0.3}), std::invalid_argument);
  }
}
