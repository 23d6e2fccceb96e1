#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "sheetcap/gaussian_fields.hpp"
#include "sheetcap/montecarlo.hpp"
#include "sheetcap/stats.hpp"

using namespace sheetcap;

namespace {

// Empirical covariance of coordinate 0 at two nodes, with its standard error.
std::pair<double, double> empirical_cov(const PathSource& src, std::size_t a, std::size_t b, std::size_t n,
                                        std::uint64_t seed) {
  const auto prods =
      map_paths(src, n, seed, [&](std::size_t, const FieldPath& p) { return p.at(a)[0] * p.at(b)[0]; });
  const auto e = mean_estimate(prods);
  return {e.mean, e.stderr_};
}

}  // namespace

TEST_SUITE("fields") {
  TEST_CASE("covariance examples") {
    const std::vector<double> s{1, 2}, t{2, 1};
    CHECK(covariance(CovarianceModel::brownian_sheet(), s, t) == 1.0);
    CHECK(covariance(CovarianceModel::ou_sheet(), s, s) == 1.0);
    oracle::Gen gen(51);
    for (int trial = 0; trial < 100; ++trial) {
      const auto a = gen.point(2, 0, 3), b = gen.point(2, 0, 3);
      CHECK(covariance(CovarianceModel::fbm_sheet(0.5), a, b) ==
            doctest::Approx(covariance(CovarianceModel::brownian_sheet(), a, b)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(CovarianceModel::fbm_sheet(1.0), std::invalid_argument);
    CHECK_THROWS_AS(CovarianceModel::fbm_sheet(0.5, 0.0), std::invalid_argument);
  }

  TEST_CASE("correlation is below one off the diagonal") {
    oracle::Gen gen(52);
    const std::vector<CovarianceModel> models{CovarianceModel::brownian_sheet(), CovarianceModel::ou_sheet(),
                                              CovarianceModel::fbm_sheet(0.3), CovarianceModel::fbm_sheet(0.8)};
    for (const auto& m : models) {
      for (int trial = 0; trial < 200; ++trial) {
        const auto s = gen.point(2, 0.5, 2.5), t = gen.point(2, 0.5, 2.5);
        const double rho = covariance(m, s, t) / std::sqrt(covariance(m, s, s) * covariance(m, t, t));
        CHECK(rho < 1.0);
        CHECK(covariance(m, s, s) / std::sqrt(covariance(m, s, s) * covariance(m, s, s)) == doctest::Approx(1.0));
      }
    }
  }

  TEST_CASE("sheet values vanish on the axes and are deterministic in the seed") {
    const Grid g = Grid::uniform(2, 2.0, 8);
    for (const auto& m : {CovarianceModel::brownian_sheet(), CovarianceModel::fbm_sheet(0.7)}) {
      const FieldPath p = simulate(m, g, 3, 99);
      for (std::size_t node = 0; node < g.node_count(); ++node) {
        const auto multi = g.node_multi(node);
        if (multi[0] == 0 || multi[1] == 0)
          for (double v : p.at(node)) CHECK(v == 0.0);
      }
      const FieldPath q = simulate(m, g, 3, 99);
      CHECK(p.values == q.values);
      CHECK(p.values != simulate(m, g, 3, 100).values);
    }
  }

  TEST_CASE("sheet values are cumulative sums of the increments") {
    oracle::Gen gen(53);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = gen.integer(1, 3);
      const Grid g = Grid::uniform(n, gen.uniform(0.5, 2.0), gen.integer(1, 6));
      const FieldPath p = simulate(CovarianceModel::brownian_sheet(), g, 2, static_cast<std::uint64_t>(trial));
      REQUIRE(p.has_increments());
      for (std::size_t node = 0; node < g.node_count(); ++node) {
        const auto multi = g.node_multi(node);
        // sum the increments of every cell below the node
        double sum = 0.0;
        std::vector<std::size_t> cdims;
        for (int k = 0; k < n; ++k) cdims.push_back(g.nodes_along(k) - 1);
        for (std::size_t c = 0; c < g.cell_count(); ++c) {
          std::size_t rest = c;
          bool below = true;
          for (int k = n - 1; k >= 0; --k) {
            const std::size_t idx = rest % cdims[static_cast<std::size_t>(k)];
            rest /= cdims[static_cast<std::size_t>(k)];
            below &= idx < multi[static_cast<std::size_t>(k)];
          }
          if (below) sum += p.increments[c * 2];
        }
        CHECK(p.at(node)[0] == doctest::Approx(sum).epsilon(1e-12).scale(1.0));
      }
    }
  }

  TEST_CASE("sheet variance at (1,1) is one") {
    const Grid g = Grid::uniform(2, 2.0, 4);
    const auto src = PathSource::gaussian(CovarianceModel::brownian_sheet(), g, 1);
    const std::size_t node = g.node_index(std::vector<std::size_t>{2, 2});
    const auto [v, se] = empirical_cov(src, node, node, 10000, 5);
    CHECK(std::abs(v - 1.0) < 4.0 * se);
  }

  TEST_CASE("increments over disjoint rectangles are uncorrelated") {
    const Grid g = Grid::uniform(2, 1.0, 4);
    const auto src = PathSource::gaussian(CovarianceModel::brownian_sheet(), g, 1);
    const std::size_t n = 10000;
    // rectangle increment over the cell [i,i+1] x [j,j+1] from node values
    auto rect = [&](const FieldPath& p, std::size_t i, std::size_t j) {
      auto at = [&](std::size_t a, std::size_t b) { return p.at(g.node_index(std::vector<std::size_t>{a, b}))[0]; };
      return at(i + 1, j + 1) - at(i + 1, j) - at(i, j + 1) + at(i, j);
    };
    const auto pairs = map_paths(src, n, 17, [&](std::size_t, const FieldPath& p) {
      return std::pair<double, double>{rect(p, 0, 0), rect(p, 2, 3)};
    });
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (const auto& [x, y] : pairs) {
      sx += x;
      sy += y;
      sxx += x * x;
      syy += y * y;
      sxy += x * y;
    }
    const double m = static_cast<double>(n);
    const double corr = (sxy / m - sx / m * sy / m) /
                        std::sqrt((sxx / m - sx / m * sx / m) * (syy / m - sy / m * sy / m));
    CHECK(std::abs(corr) < 4.0 / std::sqrt(m));
  }

  TEST_CASE("fbm with H = 1/2 matches the sheet simulator in law") {
    const Grid g = Grid::uniform(2, 2.0, 4);
    const auto sheet = PathSource::gaussian(CovarianceModel::brownian_sheet(), g, 1);
    const auto fbm = PathSource::gaussian(CovarianceModel::fbm_sheet(0.5), g, 1);
    const std::size_t a = g.node_index(std::vector<std::size_t>{1, 3});
    const std::size_t b = g.node_index(std::vector<std::size_t>{4, 2});
    const auto [cs, ses] = empirical_cov(sheet, a, b, 10000, 1);
    const auto [cf, sef] = empirical_cov(fbm, a, b, 10000, 2);
    CHECK(std::abs(cs - cf) < 4.0 * std::hypot(ses, sef));
  }

  TEST_CASE("ou sheet is stationary with unit variance") {
    const Grid g = Grid::windowed(2, 1.0, 2.0, 2, 4);
    const auto src = PathSource::gaussian(CovarianceModel::ou_sheet(), g, 1);
    for (const auto& m : {std::vector<std::size_t>{2, 2}, std::vector<std::size_t>{6, 3}}) {
      const std::size_t node = g.node_index(m);
      const auto [v, se] = empirical_cov(src, node, node, 10000, 8);
      CHECK(std::abs(v - 1.0) < 4.0 * se);
    }
  }

  TEST_CASE("fbm axis factor reproduces the axis covariance and guards its size") {
    const std::vector<double> nodes{0.25, 0.5, 0.75, 1.0, 1.5};
    const Eigen::MatrixXd l = fbm_axis_factor(nodes, 0.3, 2.0);
    const Eigen::MatrixXd c = l * l.transpose();
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        const double ti = nodes[i], tj = nodes[j];
        const double want = std::pow(ti, 0.6) + std::pow(tj, 0.6) - std::pow(std::abs(ti - tj), 0.6);
        CHECK(c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == doctest::Approx(want).epsilon(1e-9));
      }
    CHECK_THROWS_AS(GaussianSampler(CovarianceModel::fbm_sheet(0.7), Grid::uniform(2, 1.0, 600), 1),
                    std::invalid_argument);
  }

  TEST_CASE("hypothesis A1 exponents for the sheet and fbm") {
    const auto sheet = check_hypothesis_a1(CovarianceModel::brownian_sheet(), 2, 1.0, 2.0, 0.5, 1.0, 20000, 3);
    CHECK(sheet.alpha_fit == doctest::Approx(0.5).epsilon(0.1));
    CHECK(sheet.all_pass());
    const auto fbm = check_hypothesis_a1(CovarianceModel::fbm_sheet(0.7), 2, 1.0, 2.0, 0.7, 1.0, 20000, 3);
    CHECK(fbm.alpha_fit == doctest::Approx(0.7).epsilon(0.07));
    CHECK(fbm.all_pass());
    // the wrong exponent is caught by the two-sided bound on 1 - rho^2
    for (double alpha : {0.2, 0.8}) {
      const auto wrong = check_hypothesis_a1(CovarianceModel::brownian_sheet(), 2, 1.0, 2.0, alpha, 1.0, 20000, 3);
      CHECK_FALSE(wrong.pass_33);
    }
    CHECK_THROWS_AS(check_hypothesis_a1(CovarianceModel::brownian_sheet(), 2, 2.0, 1.0, 0.5, 1.0, 100, 1),
                    std::invalid_argument);
  }

  TEST_CASE("map_paths is independent of the worker count and of serial execution") {
    const Grid g = Grid::uniform(2, 1.0, 8);
    const auto src = PathSource::gaussian(CovarianceModel::fbm_sheet(0.3), g, 2);
    auto f = [](std::size_t, const FieldPath& p) { return p.values; };
    const auto serial = map_paths(src, 37, 4, f, Execution::Serial);
    set_worker_count(3);
    const auto three = map_paths(src, 37, 4, f);
    set_worker_count(1);
    const auto one = map_paths(src, 37, 4, f);
    set_worker_count(0);
    CHECK(serial == three);
    CHECK(serial == one);
  }
}
