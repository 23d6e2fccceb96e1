#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <limits>
#include <numbers>

#include "oracles.hpp"
#include "sheetcap/kernels.hpp"

using namespace sheetcap;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> fibonacci_sphere(std::size_t n, double r) {
  std::vector<double> pts;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
    const double rho = std::sqrt(1.0 - z * z);
    const double phi = golden * static_cast<double>(i);
    pts.insert(pts.end(), {r * rho * std::cos(phi), r * rho * std::sin(phi), r * z});
  }
  return pts;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("kernel values") {
    CHECK(RieszKernel(2.0, 5)(std::vector<double>{1, 0, 0, 0, 0}) == 1.0);
    CHECK(RieszKernel(1.0, 3)(std::vector<double>{0.5, 0, 0}) == 2.0);
    CHECK(RieszKernel(0.0, 3, 1.0)(std::vector<double>{3, 0, 0}) == doctest::Approx(0.0));
    CHECK(RieszKernel(1.0, 3)(std::vector<double>{0, 0, 0}) == kInf);
    CHECK(RieszKernel(0.0, 2)(std::vector<double>{0, 0}) == kInf);
    CHECK(RieszKernel(-1.0, 3)(std::vector<double>{0, 0, 0}) == 1.0);
    CHECK(RieszKernel(-1.0, 3)(std::vector<double>{7, 0, 1}) == 1.0);
  }

  TEST_CASE("kernel construction guards") {
    CHECK_THROWS_AS(RieszKernel(3.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(RieszKernel(1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(RieszKernel(0.0, 2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(RieszKernel(1.0, 3)(std::vector<double>{1, 0}), std::invalid_argument);
  }

  TEST_CASE("kernel is even and scales as lambda^-beta") {
    oracle::Gen gen(31);
    for (int trial = 0; trial < 200; ++trial) {
      const int d = gen.integer(1, 6);
      const double beta = gen.uniform(0.05, d - 0.05);
      const RieszKernel k(beta, d);
      auto x = gen.point(d, -2, 2);
      auto minus = x;
      for (auto& v : minus) v = -v;
      CHECK(k(x) == k(minus));
      const double lambda = gen.uniform(0.1, 10);
      auto scaled = x;
      for (auto& v : scaled) v *= lambda;
      CHECK(k(scaled) == doctest::Approx(std::pow(lambda, -beta) * k(x)).epsilon(1e-12));
    }
  }

  TEST_CASE("self energy matches independent cube means") {
    const RieszKernel newton(1.0, 3);
    CHECK(newton.self_energy(1.0) == doctest::Approx(oracle::kCubeNewtonianMean).epsilon(1e-10));
    CHECK(newton.self_energy(0.25) == doctest::Approx(4.0 * oracle::kCubeNewtonianMean).epsilon(1e-10));
    const RieszKernel planar(1.0, 2);
    CHECK(planar.self_energy(1.0) == doctest::Approx(oracle::square_newtonian_mean()).epsilon(1e-10));
    const RieszKernel log3(0.0, 3, 2.0);
    CHECK(log3.self_energy(0.5) == doctest::Approx(std::log(3.0 * 2.0 / 0.5) - oracle::kCubeLogMean).epsilon(1e-9));
    CHECK(RieszKernel(-2.0, 3).self_energy(0.1) == 1.0);
  }

  TEST_CASE("self energy agrees with Monte Carlo cube averages") {
    oracle::Gen gen(32);
    for (int d : {1, 2, 4, 5}) {
      const double beta = 0.5 * d;
      const RieszKernel k(beta, d);
      const std::size_t n = 400000;
      double sum = 0.0, sum2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = k(gen.point(d, -0.5, 0.5));
        sum += v;
        sum2 += v * v;
      }
      const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
      CHECK(std::abs(k.self_energy(1.0) - mean) < 5.0 * se);
    }
  }

  TEST_CASE("potential examples") {
    const RieszKernel k(1.0, 3);
    const auto unit = uniform_measure(3, {0, 0, 0}, 0.1);
    CHECK(potential(k, unit, std::vector<double>{2, 0, 0}) == 0.5);
    const auto pair = uniform_measure(3, {1, 0, 0, -1, 0, 0}, 0.1);
    CHECK(potential(k, pair, std::vector<double>{0, 0, 0}) == 1.0);
    CHECK(potential(k, pair, std::vector<double>{1, 0, 0}) == kInf);
  }

  TEST_CASE("energy diagonal modes") {
    const RieszKernel k(1.0, 3);
    const auto single = uniform_measure(3, {0, 0, 0}, 0.1);
    CHECK(energy(k, single, DiagonalMode::Include) == kInf);
    const auto pair = uniform_measure(3, {0, 0, 0, 1, 0, 0}, 0.1);
    CHECK(energy(k, pair, DiagonalMode::Exclude) == 0.5);
    CHECK(energy(k, pair, DiagonalMode::CellRegularized) ==
          doctest::Approx(0.5 + 0.5 * k.self_energy(0.1)).epsilon(1e-14));
    CHECK(parse_diagonal_mode("cell_regularized") == DiagonalMode::CellRegularized);
    CHECK_THROWS_AS(parse_diagonal_mode("diagonal"), std::invalid_argument);
  }

  TEST_CASE("uniform measure on the sphere has unit energy") {
    const RieszKernel k(1.0, 3);
    const auto mu = uniform_measure(3, fibonacci_sphere(10000, 1.0), 0.02);
    const double oracle_value = oracle::sphere_newtonian_energy(1.0);
    CHECK(oracle_value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(energy(k, mu, DiagonalMode::Exclude) == doctest::Approx(oracle_value).epsilon(0.02));
  }

  TEST_CASE("energy is invariant under permutation and translation") {
    oracle::Gen gen(33);
    for (int trial = 0; trial < 30; ++trial) {
      const int d = gen.integer(2, 5);
      const RieszKernel k(gen.uniform(0.2, d - 0.2), d);
      const int n = gen.integer(2, 30);
      DiscreteMeasure mu;
      mu.dim = d;
      mu.cell_size = 0.05;
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        const auto p = gen.point(d, -1, 1);
        mu.support.insert(mu.support.end(), p.begin(), p.end());
        mu.weights.push_back(gen.uniform(0.1, 1));
        total += mu.weights.back();
      }
      for (auto& w : mu.weights) w /= total;
      const double e = energy(k, mu, DiagonalMode::CellRegularized);

      DiscreteMeasure rev = mu;
      for (int i = 0; i < n; ++i) {
        const int j = n - 1 - i;
        for (int c = 0; c < d; ++c) rev.support[i * d + c] = mu.support[j * d + c];
        rev.weights[i] = mu.weights[j];
      }
      CHECK(energy(k, rev, DiagonalMode::CellRegularized) == doctest::Approx(e).epsilon(1e-12));

      DiscreteMeasure moved = mu;
      const auto shift = gen.point(d, -5, 5);
      for (std::size_t i = 0; i < moved.support.size(); ++i) moved.support[i] += shift[i % d];
      CHECK(energy(k, moved, DiagonalMode::CellRegularized) == doctest::Approx(e).epsilon(1e-9));

      CHECK(e >= energy(k, mu, DiagonalMode::Exclude));
    }
  }

  TEST_CASE("cell-regularized and exclude-mode energies converge under refinement") {
    // uniform measure on the cell centers of the unit cube: the diagonal
    // share is n * (1/n)^2 * h^-beta * c = c h^(3 - beta)
    const RieszKernel k(1.0, 3);
    double previous = kInf;
    for (int m : {4, 8, 16}) {
      const double h = 1.0 / m;
      std::vector<double> pts;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          for (int l = 0; l < m; ++l) pts.insert(pts.end(), {(i + 0.5) * h, (j + 0.5) * h, (l + 0.5) * h});
      const auto mu = uniform_measure(3, pts, h);
      const double gap = energy(k, mu, DiagonalMode::CellRegularized) - energy(k, mu, DiagonalMode::Exclude);
      CHECK(gap > 0.0);
      CHECK(gap == doctest::Approx(oracle::kCubeNewtonianMean * h * h).epsilon(1e-9));
      CHECK(gap < previous);
      previous = gap;
    }
  }

  TEST_CASE("serial and parallel energies are identical") {
    const RieszKernel k(1.0, 3);
    const auto mu = uniform_measure(3, fibonacci_sphere(3000, 1.0), 0.05);
    CHECK(energy(k, mu, DiagonalMode::CellRegularized, Execution::Serial) ==
          energy(k, mu, DiagonalMode::CellRegularized, Execution::Parallel));
  }

  TEST_CASE("measure validation") {
    DiscreteMeasure mu = uniform_measure(2, {0, 0, 1, 1}, 0.1);
    CHECK_NOTHROW(mu.validate());
    mu.weights = {0.7, 0.7};
    CHECK_THROWS_AS(mu.validate(), std::invalid_argument);
    mu = uniform_measure(2, {0, 0, 0, 0}, 0.1);
    CHECK_THROWS_AS(mu.validate(), std::invalid_argument);
  }
}
