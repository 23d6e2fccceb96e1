#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "sheetcap/hitting.hpp"
#include "sheetcap/montecarlo.hpp"

using namespace sheetcap;

TEST_SUITE("hitting") {
  TEST_CASE("hits on a constant path") {
    const Grid g = Grid::windowed(2, 1.0, 2.0, 2, 4);
    FieldPath p;
    p.grid = g;
    p.d = 2;
    p.values.assign(g.node_count() * 2, 0.0);
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      p.at(n)[0] = 1.0;
      p.at(n)[1] = 2.0;
    }
    const Window w{1.0, 2.0};
    CHECK(hits(p, CompactSet::ball({1.0, 2.1}, 0.2), w, 0.0));
    CHECK_FALSE(hits(p, CompactSet::ball({3.0, 2.0}, 0.5), w, 1.0));
    CHECK(hits(p, CompactSet::ball({3.0, 2.0}, 0.5), w, 1.5));
    CHECK_THROWS_AS(hits(p, CompactSet::ball({0, 0}, 1), Window{1.1, 2.0}, 0.0), std::invalid_argument);
  }

  TEST_CASE("hits is monotone in the margin and in set inclusion") {
    oracle::Gen gen(71);
    const Grid g = Grid::windowed(2, 1.0, 2.0, 2, 8);
    const Window w{1.0, 2.0};
    for (int trial = 0; trial < 100; ++trial) {
      const FieldPath p = simulate(CovarianceModel::brownian_sheet(), g, 3, static_cast<std::uint64_t>(trial));
      const auto c = gen.point(3, -1.5, 1.5);
      const double r = gen.uniform(0.05, 0.6);
      const double m = gen.uniform(0.0, 0.3);
      if (hits(p, CompactSet::ball(c, r), w, 0.0)) CHECK(hits(p, CompactSet::ball(c, r), w, m));
      if (hits(p, CompactSet::ball(c, r), w, m)) CHECK(hits(p, CompactSet::ball(c, 2 * r), w, m));
      // larger window
      if (hits(p, CompactSet::ball(c, r), Window{1.0, 1.5}, m)) CHECK(hits(p, CompactSet::ball(c, r), w, m));
    }
  }

  TEST_CASE("finer node sets can only add hits") {
    const Grid g = Grid::windowed(2, 1.0, 2.0, 2, 16);
    const auto fine = window_nodes(g, 1.0, 2.0);
    std::vector<std::size_t> coarse;
    for (std::size_t node : fine) {
      const auto m = g.node_multi(node);
      if (m[0] % 2 == 0 && m[1] % 2 == 0) coarse.push_back(node);
    }
    const CompactSet target = CompactSet::ball({0.3, -0.2, 0.1}, 0.25);
    std::size_t fine_hits = 0, coarse_hits = 0;
    for (std::uint64_t s = 0; s < 300; ++s) {
      const FieldPath p = simulate(CovarianceModel::brownian_sheet(), g, 3, s);
      const bool hc = min_distance(p, coarse, target) == 0.0;
      const bool hf = min_distance(p, fine, target) == 0.0;
      if (hc) CHECK(hf);
      coarse_hits += hc;
      fine_hits += hf;
    }
    CHECK(fine_hits >= coarse_hits);
  }

  TEST_CASE("estimates: unreachable sets, recurrent low dimension, interval width") {
    const Grid g = Grid::windowed(2, 1.0, 2.0, 2, 16);
    const Window w{1.0, 2.0};
    const auto src3 = PathSource::gaussian(CovarianceModel::brownian_sheet(), g, 3);
    const auto far = estimate_hit_prob(src3, CompactSet::point({100, 0, 0}), w, 200, 0.0, 1);
    CHECK(far.p_hat == 0.0);
    CHECK(far.ci_low == 0.0);
    CHECK(far.ci_high > 0.0);

    // generous window: the range of a real-valued sheet covers a neighbourhood of 0.3
    const Grid wide = Grid::windowed(2, 0.5, 4.0, 2, 32);
    const auto src1 = PathSource::gaussian(CovarianceModel::brownian_sheet(), wide, 1);
    const auto near = estimate_hit_prob(src1, CompactSet::box({0.2}, {0.4}), Window{0.5, 4.0}, 1000, 0.0, 2);
    CHECK(near.p_hat >= 0.9);

    const auto mid = CompactSet::ball({0.5, 0.5, 0.0}, 0.4);
    const auto a = estimate_hit_prob(src3, mid, w, 4000, 0.0, 3);
    const auto b = estimate_hit_prob(src3, mid, w, 16000, 0.0, 3);
    REQUIRE(a.p_hat > 0.05);
    CHECK((a.ci_high - a.ci_low) / (b.ci_high - b.ci_low) == doctest::Approx(2.0).epsilon(0.2));
    CHECK_THROWS_AS(estimate_hit_prob(src3, mid, w, 0, 0.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(estimate_hit_prob(src3, CompactSet::ball({0, 0}, 1), w, 10, 0.0, 3), std::invalid_argument);
  }

  TEST_CASE("paired seeds reproduce estimates exactly and worker count does not matter") {
    const Grid g = Grid::windowed(2, 1.0, 2.0, 2, 8);
    const auto src = PathSource::spde(perturbed_identity(3, 1.0), g);
    const auto set = CompactSet::ball({0.5, 0.0, 0.0}, 0.5);
    const auto a = estimate_hit_prob(src, set, Window{1.0, 2.0}, 500, 0.1, 9, Execution::Serial);
    set_worker_count(2);
    const auto b = estimate_hit_prob(src, set, Window{1.0, 2.0}, 500, 0.1, 9);
    set_worker_count(0);
    CHECK(a.n_hits == b.n_hits);
    CHECK(a.ci_low == b.ci_low);
  }

  TEST_CASE("margin policies") {
    const Grid g = Grid::windowed(2, 1.0, 2.0, 4, 64);
    const Window w{1.0, 2.0};
    CHECK(MarginPolicy::fixed(0.2).margin(g, w) == 0.2);
    const double h = 1.0 / 64.0;
    CHECK(MarginPolicy::modulus(3.0, 0.1).margin(g, w) == doctest::Approx(3.0 * std::pow(std::sqrt(2.0) * h, 0.4)));
    // two parameters at the window center 1.5: 2 sqrt(1.5)
    CHECK(MarginPolicy::continuity().margin(g, w, 2.0) ==
          doctest::Approx(0.5826 * 2.0 * std::sqrt(h) * 2.0 * std::sqrt(1.5)));
    CHECK(parse_margin_policy("fixed:0.3").value == 0.3);
    CHECK(parse_margin_policy("modulus").kappa == 3.0);
    CHECK(parse_margin_policy("continuity:0.4").kappa == 0.4);
    CHECK_THROWS_AS(parse_margin_policy("wobbly"), std::invalid_argument);
    CHECK_THROWS_AS(parse_margin_policy("fixed:x"), std::invalid_argument);
  }

  TEST_CASE("scaling experiment keeps unsaturated radii and flags too few") {
    const Grid g = Grid::windowed(2, 1.0, 2.0, 2, 16);
    const auto src = PathSource::gaussian(CovarianceModel::brownian_sheet(), g, 5);
    const auto rep = scaling_experiment(src, {0, 0, 0, 0, 0}, log_space(0.05, 0.8, 6), Window{1.0, 2.0}, 2000,
                                        MarginPolicy::continuity(), 4);
    CHECK(rep.estimates.size() == 6);
    for (std::size_t i = 1; i < rep.estimates.size(); ++i) CHECK(rep.estimates[i].p_hat >= rep.estimates[i - 1].p_hat);
    for (std::size_t i = 0; i < rep.estimates.size(); ++i) {
      const double p = rep.estimates[i].p_hat;
      CHECK(rep.retained[i] == (p >= 0.01 && p <= 0.99));
    }
    CHECK(rep.slope > 0.0);

    const auto few = scaling_experiment(src, {0, 0, 0, 0, 0}, {0.001, 0.002, 0.004}, Window{1.0, 2.0}, 200,
                                        MarginPolicy::fixed(0.0), 4);
    CHECK_FALSE(few.sufficient);
    CHECK_THROWS_AS(scaling_experiment(src, {0, 0, 0, 0, 0}, {0.2, 0.1}, Window{1.0, 2.0}, 10,
                                       MarginPolicy::fixed(0.0), 4),
                    std::invalid_argument);
  }
}
