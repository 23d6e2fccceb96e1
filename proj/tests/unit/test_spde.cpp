#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "sheetcap/gaussian_fields.hpp"
#include "sheetcap/montecarlo.hpp"
#include "sheetcap/spde.hpp"
#include "sheetcap/stats.hpp"

using namespace sheetcap;

namespace {

FieldPath sheet_noise(const Grid& g, int d, std::uint64_t seed) {
  return simulate(CovarianceModel::brownian_sheet(), g, d, seed);
}

// Aggregates fine-cell increments into the cells of a grid `factor` times coarser.
FieldPath coarsen(const FieldPath& fine, int factor) {
  const std::size_t d = static_cast<std::size_t>(fine.d);
  const std::size_t fc = fine.grid.nodes_along(0) - 1;
  const std::size_t cc = fc / static_cast<std::size_t>(factor);
  FieldPath out;
  out.grid = Grid::uniform(2, fine.grid.axis(0).back(), static_cast<int>(cc));
  out.d = fine.d;
  out.increments.assign(cc * cc * d, 0.0);
  for (std::size_t i = 0; i < fc; ++i)
    for (std::size_t j = 0; j < fc; ++j)
      for (std::size_t k = 0; k < d; ++k)
        out.increments[((i / factor) * cc + j / factor) * d + k] += fine.increments[(i * fc + j) * d + k];
  out.values.assign(out.grid.node_count() * d, 0.0);
  return out;
}

double two_sample_ks(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double worst = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    worst = std::max(worst, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return worst;
}

}  // namespace

TEST_SUITE("spde") {
  TEST_CASE("identity diffusion reproduces the driving sheet bit for bit") {
    oracle::Gen gen(61);
    for (int trial = 0; trial < 10; ++trial) {
      const int d = gen.integer(1, 5);
      const Grid g = Grid::windowed(2, gen.uniform(0.3, 1.0), gen.uniform(1.2, 2.5), gen.integer(1, 4),
                                    gen.integer(2, 20));
      const auto seed = static_cast<std::uint64_t>(trial);
      const FieldPath w = sheet_noise(g, d, seed);
      CHECK(solve(constant_diagonal(d, 1.0), g, w).values == w.values);
      CHECK(solve(constant_diagonal(d, 1.0), g, seed).values == w.values);
    }
  }

  TEST_CASE("scaled identity gives the scaled sheet") {
    const Grid g = Grid::uniform(2, 2.0, 16);
    const FieldPath w = sheet_noise(g, 3, 5);
    for (double rho : {0.25, 0.5, 2.0, 4.0}) {
      const FieldPath x = solve(constant_diagonal(3, rho), g, w);
      bool exact = true;
      for (std::size_t i = 0; i < w.values.size(); ++i) exact &= x.values[i] == rho * w.values[i];
      CHECK(exact);
    }
    // other rho: equal up to rounding of the rescaled partial sums
    const FieldPath x = solve(constant_diagonal(3, 0.8), g, w);
    for (std::size_t i = 0; i < w.values.size(); ++i)
      CHECK(x.values[i] == doctest::Approx(0.8 * w.values[i]).epsilon(1e-13).scale(1.0));
  }

  TEST_CASE("constant drift adds c t1 t2 exactly on dyadic grids") {
    const Grid g = Grid::uniform(2, 2.0, 32);
    const FieldPath w = sheet_noise(g, 2, 8);
    const std::vector<double> c{0.75, -1.5};
    const FieldPath x = solve(with_constant_drift(constant_diagonal(2, 1.0), c), g, w);
    bool exact = true;
    for (std::size_t node = 0; node < g.node_count(); ++node) {
      const auto t = g.node_point(node);
      for (std::size_t k = 0; k < 2; ++k) exact &= x.at(node)[k] == w.at(node)[k] + c[k] * t[0] * t[1];
    }
    CHECK(exact);
  }

  TEST_CASE("axes hold x0") {
    Coefficients c = perturbed_identity(2, 1.0);
    c.x0 = {0.5, -0.25};
    const Grid g = Grid::uniform(2, 1.0, 8);
    const FieldPath x = solve(c, g, 3);
    for (std::size_t node = 0; node < g.node_count(); ++node) {
      const auto m = g.node_multi(node);
      if (m[0] == 0 || m[1] == 0) {
        CHECK(x.at(node)[0] == 0.5);
        CHECK(x.at(node)[1] == -0.25);
      }
    }
  }

  TEST_CASE("solver errors") {
    const Grid g = Grid::uniform(2, 1.0, 4);
    Coefficients bad = constant_diagonal(1, 1.0);
    bad.sigma = [](std::span<const double> x, std::span<double> out) { out[0] = 1e300 * (1.0 + std::abs(x[0])) * 1e300; };
    CHECK_THROWS_AS(solve(bad, g, 1), SpdeError);
    try {
      solve(bad, g, 1);
    } catch (const SpdeError& e) {
      CHECK(std::string(e.what()).find("cell (0,0)") != std::string::npos);
    }
    CHECK_THROWS_AS(solve(constant_diagonal(2, 1.0), Grid::uniform(3, 1.0, 2), 1), std::invalid_argument);
    FieldPath noise = sheet_noise(g, 1, 1);
    CHECK_THROWS_AS(solve(constant_diagonal(2, 1.0), g, noise), std::invalid_argument);
    noise.increments.clear();
    CHECK_THROWS_AS(solve(constant_diagonal(1, 1.0), g, noise), std::invalid_argument);
    CHECK_THROWS_AS(perturbed_identity(2, 1.0, 0.4), std::invalid_argument);
  }

  TEST_CASE("shipped coefficient families satisfy their declared constants") {
    CHECK(spot_check(constant_diagonal(3, 0.7), 1000, 1).ok);
    CHECK(spot_check(perturbed_identity(2, 1.0), 1000, 2).ok);
    CHECK(spot_check(perturbed_identity(5, 2.0), 1000, 3).ok);
    CHECK(spot_check(with_constant_drift(perturbed_identity(2, 1.0), {0.3, -0.2}), 1000, 4).ok);
    Coefficients lying = constant_diagonal(2, 0.5);
    lying.ellipticity_rho = 0.6;
    CHECK_FALSE(spot_check(lying, 100, 5).ok);
  }

  TEST_CASE("continuation freezes the past and regenerates the base with its own seed") {
    const Coefficients c = perturbed_identity(2, 1.0);
    const Grid g = Grid::windowed(2, 1.0, 2.0, 2, 8);
    const std::uint64_t base_seed = 77;
    const FieldPath noise = sheet_noise(g, 2, base_seed);
    const FieldPath base = solve(c, g, noise);
    const std::size_t s[2] = {5, 4};
    CHECK(continue_from(c, g, s, noise, base_seed).values == base.values);
    const Continuation cont(c, noise, s);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const FieldPath x = continue_from(c, g, s, noise, seed);
      CHECK(cont.sample(seed).values == x.values);
      for (std::size_t i = 0; i <= s[0]; ++i)
        for (std::size_t j = 0; j <= s[1]; ++j) {
          const std::size_t node = g.node_index(std::vector<std::size_t>{i, j});
          CHECK(x.at(node)[0] == base.at(node)[0]);
          CHECK(x.at(node)[1] == base.at(node)[1]);
        }
      CHECK(x.values != base.values);
    }
    const std::size_t outside[2] = {20, 1};
    CHECK_THROWS_AS(continue_from(c, g, outside, noise, 1), std::invalid_argument);
  }

  TEST_CASE("linear increments after the frozen past have mean zero") {
    const Coefficients c = constant_diagonal(1, 1.0);
    const Grid g = Grid::uniform(2, 2.0, 8);
    const FieldPath noise = sheet_noise(g, 1, 3);
    const std::size_t s[2] = {4, 4};
    const Continuation cont(c, noise, s);
    const std::size_t sn = g.node_index(std::vector<std::size_t>{4, 4});
    const std::size_t tn = g.node_index(std::vector<std::size_t>{6, 7});
    std::vector<double> inc;
    for (std::size_t i = 0; i < 10000; ++i) {
      const FieldPath x = cont.sample(derive_seed(9, i));
      inc.push_back(x.at(tn)[0] - x.at(sn)[0]);
    }
    const auto e = mean_estimate(inc);
    CHECK(std::abs(e.mean) < 4.0 * e.stderr_);
  }

  TEST_CASE("continuation from s = 0 has the unconditional law") {
    const Coefficients c = perturbed_identity(2, 1.0);
    const Grid g = Grid::uniform(2, 1.5, 6);
    const FieldPath noise = sheet_noise(g, 2, 1);
    const std::size_t s[2] = {0, 0};
    const Continuation cont(c, noise, s);
    const std::size_t node = g.node_count() - 1;
    std::vector<double> a, b;
    for (std::size_t i = 0; i < 2000; ++i) {
      a.push_back(cont.sample(derive_seed(1, i)).at(node)[0]);
      b.push_back(solve(c, g, derive_seed(2, i)).at(node)[0]);
    }
    // two-sample KS at level 0.01: c(0.01) sqrt(2/n)
    CHECK(two_sample_ks(a, b) < 1.628 * std::sqrt(2.0 / 2000.0));
  }

  TEST_CASE("refinement differences shrink") {
    const Coefficients c = perturbed_identity(2, 1.0);
    const Grid fine = Grid::uniform(2, 1.0, 32);
    std::vector<double> diffs(3, 0.0);
    const std::size_t n = 200;
    for (std::size_t p = 0; p < n; ++p) {
      const FieldPath noise = sheet_noise(fine, 2, derive_seed(4, p));
      std::vector<double> corner;
      for (int factor : {8, 4, 2, 1}) {
        const FieldPath x = solve(c, Grid::uniform(2, 1.0, 32 / factor), coarsen(noise, factor));
        corner.push_back(x.at(x.grid.node_count() - 1)[0]);
      }
      for (std::size_t k = 0; k < 3; ++k) diffs[k] += std::abs(corner[k + 1] - corner[k]) / n;
    }
    CHECK(diffs[1] < diffs[0]);
    CHECK(diffs[2] < diffs[1]);
  }

  TEST_CASE("moments of the nonlinear solution stay stable under refinement") {
    const Coefficients c = perturbed_identity(2, 1.0);
    std::vector<double> worst;
    for (int cells : {8, 16}) {
      const auto src = PathSource::spde(c, Grid::uniform(2, 2.0, cells));
      const auto sup = map_paths(src, 1000, 6, [](std::size_t, const FieldPath& p) {
        double m = 0.0;
        for (double v : p.values) m = std::max(m, std::abs(v));
        return m;
      });
      worst.push_back(*std::max_element(sup.begin(), sup.end()));
      CHECK(std::isfinite(worst.back()));
    }
    CHECK(worst[1] / worst[0] == doctest::Approx(1.0).epsilon(0.5));
  }

  TEST_CASE("girsanov weights") {
    const Grid g = Grid::uniform(2, 1.0, 8);
    const std::size_t t[2] = {8, 8};
    const FieldPath x = solve(perturbed_identity(2, 1.0), g, 4);
    CHECK(girsanov_weight(perturbed_identity(2, 1.0), x, t, GirsanovDirection::L) == 1.0);

    const std::vector<double> c{0.4, -0.3};
    const Coefficients drifted = with_constant_drift(constant_diagonal(2, 1.0), c);
    const FieldPath w = sheet_noise(g, 2, 4);
    const FieldPath y = solve(without_drift(drifted), g, w);
    const auto wt = w.at(g.node_count() - 1);
    const double cw = c[0] * wt[0] + c[1] * wt[1];
    const double c2 = c[0] * c[0] + c[1] * c[1];
    CHECK(girsanov_weight(drifted, y, t, GirsanovDirection::J) ==
          doctest::Approx(std::exp(-cw + 0.5 * c2)).epsilon(1e-12));
    CHECK(girsanov_weight(drifted, y, t, GirsanovDirection::L) ==
          doctest::Approx(std::exp(-cw - 0.5 * c2)).epsilon(1e-12));
    FieldPath bare = y;
    bare.increments.clear();
    CHECK_THROWS_AS(girsanov_weight(drifted, bare, t, GirsanovDirection::L), std::invalid_argument);
    Coefficients singular = drifted;
    singular.sigma = [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
    CHECK_THROWS_AS(girsanov_weight(singular, y, t, GirsanovDirection::L), SpdeError);
  }
}
