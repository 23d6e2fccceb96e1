#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numbers>

#include "oracles.hpp"
#include "sheetcap/density.hpp"

using namespace sheetcap;

TEST_SUITE("density") {
  TEST_CASE("bandwidth rules") {
    oracle::Gen gen(81);
    std::vector<double> s;
    for (int i = 0; i < 1000; ++i) {
      s.push_back(2.0 * gen.normal());
      s.push_back(0.5 * gen.normal());
    }
    const auto scott = bandwidths(s, 2, parse_bandwidth_policy("scott"));
    const auto silver = bandwidths(s, 2, parse_bandwidth_policy("silverman:2"));
    const double base = std::pow(1000.0, -1.0 / 6.0);
    CHECK(scott[0] / base == doctest::Approx(2.0).epsilon(0.1));
    CHECK(scott[1] / base == doctest::Approx(0.5).epsilon(0.1));
    CHECK(silver[0] / scott[0] == doctest::Approx(2.0).epsilon(1e-12));  // (4/(d+2))^(1/(d+4)) = 1 for d = 2
    CHECK_THROWS_AS(parse_bandwidth_policy("bogus"), std::invalid_argument);
    CHECK_THROWS_AS(parse_bandwidth_policy("scott:-1"), std::invalid_argument);
    CHECK_THROWS_AS(bandwidths(std::vector<double>(50, 1.0), 1, BandwidthPolicy{}), std::invalid_argument);
    CHECK_THROWS_AS(bandwidths(std::vector<double>(500, 1.0), 1, BandwidthPolicy{}), std::invalid_argument);
  }

  TEST_CASE("kde of one sample is the kernel itself") {
    const std::vector<double> sample{0.3, -0.2};
    const std::vector<double> h{0.5, 0.25};
    const std::vector<double> x{1.0, 0.1};
    const double z0 = (1.0 - 0.3) / 0.5, z1 = (0.1 + 0.2) / 0.25;
    const double want = std::exp(-0.5 * (z0 * z0 + z1 * z1)) / (2.0 * std::numbers::pi * 0.5 * 0.25);
    CHECK(kde(sample, 2, h, x)[0] == doctest::Approx(want).epsilon(1e-14));
  }

  TEST_CASE("kde integrates to one and serial equals parallel") {
    oracle::Gen gen(82);
    std::vector<double> s;
    for (int i = 0; i < 2000; ++i) s.push_back(gen.normal() + (i % 3 ? 0.0 : 3.0));
    const auto h = bandwidths(s, 1, BandwidthPolicy{});
    std::vector<double> grid;
    for (int i = 0; i <= 2000; ++i) grid.push_back(-8.0 + 16.0 * i / 2000.0);
    const auto f = kde(s, 1, h, grid, Execution::Serial);
    CHECK(f == kde(s, 1, h, grid, Execution::Parallel));
    double total = 0.0;
    for (std::size_t i = 1; i < f.size(); ++i) total += 0.5 * (f[i] + f[i - 1]) * (16.0 / 2000.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("radial evaluation set layout") {
    for (int d : {1, 2, 3, 5}) {
      const auto pts = radial_evaluation_set(d, 3.0);
      const std::size_t dirs = 2 * static_cast<std::size_t>(d) + (d > 1 ? 2 : 0);
      CHECK(pts.size() == static_cast<std::size_t>(d) * (1 + 6 * dirs));
      double max_r = 0.0;
      for (std::size_t i = 0; i < pts.size() / static_cast<std::size_t>(d); ++i) {
        double r2 = 0.0;
        for (int k = 0; k < d; ++k) r2 += pts[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] *
                                          pts[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)];
        max_r = std::max(max_r, std::sqrt(r2));
      }
      CHECK(max_r == doctest::Approx(3.0));
    }
    CHECK_THROWS_AS(radial_evaluation_set(2, 0.0), std::invalid_argument);
  }

  TEST_CASE("normal density") {
    CHECK(normal_density(std::vector<double>{0.0}, 1.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)));
    CHECK(normal_density(std::vector<double>{1.0, 1.0}, 2.0) ==
          doctest::Approx(std::exp(-0.5) / (4.0 * std::numbers::pi)));
  }
}
