#include "sheetcap/hitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace sheetcap {

namespace {

double largest_window_step(const Grid& grid, const Window& w) {
  double h = 0.0;
  for (int k = 0; k < grid.params(); ++k) {
    const long lo = grid.find_node(k, w.a), hi = grid.find_node(k, w.b);
    if (lo < 0 || hi < 0) throw std::invalid_argument("window outside grid");
    const auto& ax = grid.axis(k);
    for (long i = lo; i < hi; ++i) h = std::max(h, ax[static_cast<std::size_t>(i + 1)] - ax[static_cast<std::size_t>(i)]);
  }
  return h;
}

void check_window(const Window& w) {
  if (!(w.a > 0.0) || !(w.b > w.a)) throw std::invalid_argument("window: need 0 < a < b");
}

double min_distance_squared(const FieldPath& path, const std::vector<std::size_t>& nodes, const CompactSet& set) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t node : nodes) best = std::min(best, set.distance_squared(path.at(node)));
  return best;
}

}  // namespace

double min_distance(const FieldPath& path, const std::vector<std::size_t>& nodes, const CompactSet& set) {
  if (set.dim() != path.d) throw std::invalid_argument("hits: set and path dimensions differ");
  return std::sqrt(min_distance_squared(path, nodes, set));
}

bool hits(const FieldPath& path, const CompactSet& set, const Window& w, double margin) {
  check_window(w);
  if (!(margin >= 0.0)) throw std::invalid_argument("hits: margin must be >= 0");
  const auto nodes = window_nodes(path.grid, w.a, w.b);
  return min_distance(path, nodes, set) <= margin;
}

double MarginPolicy::margin(const Grid& grid, const Window& w, double scale) const {
  check_window(w);
  switch (kind) {
    case Kind::Fixed:
      if (!(value >= 0.0)) throw std::invalid_argument("margin: fixed margin must be >= 0");
      return value;
    case Kind::Modulus:
      return kappa * std::pow(grid.max_cell_diameter(w.a, w.b), 0.5 - eta);
    case Kind::Continuity: {
      const double h = largest_window_step(grid, w);
      const double c = 0.5 * (w.a + w.b);
      const int n = grid.params();
      return kappa * scale * std::sqrt(h) * n * std::pow(c, 0.5 * (n - 1));
    }
  }
  return 0.0;
}

std::string MarginPolicy::describe() const {
  switch (kind) {
    case Kind::Fixed:
      return fmt::format("fixed:{}", value);
    case Kind::Modulus:
      return fmt::format("modulus:{},{}", kappa, eta);
    case Kind::Continuity:
      return fmt::format("continuity:{}", kappa);
  }
  return {};
}

MarginPolicy parse_margin_policy(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  std::vector<double> args;
  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        args.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw std::invalid_argument("margin policy: bad number '" + item + "'");
      }
    }
  }
  if (kind == "fixed" && args.size() == 1) return MarginPolicy::fixed(args[0]);
  if (kind == "modulus" && args.size() <= 2)
    return MarginPolicy::modulus(args.size() > 0 ? args[0] : 3.0, args.size() > 1 ? args[1] : 0.1);
  if (kind == "continuity" && args.size() <= 1) return MarginPolicy::continuity(args.empty() ? 0.5826 : args[0]);
  throw std::invalid_argument("margin policy: cannot parse '" + text + "'");
}

double noise_scale(const PathSource& src) { return src.is_spde() ? src.coefficients().uniform_bound_T : 1.0; }

std::string describe_grid(const Grid& grid) {
  std::string out;
  for (int k = 0; k < grid.params(); ++k) {
    if (k) out += 'x';
    out += fmt::format("{}[0,{}]", grid.nodes_along(k) - 1, grid.axis(k).back());
  }
  return out;
}

HitProbEstimate make_estimate(std::size_t n_hits, std::size_t n_paths, double margin, const Grid& grid) {
  if (n_paths == 0) throw std::invalid_argument("hit estimate: n_paths must be >= 1");
  HitProbEstimate e;
  e.n_paths = n_paths;
  e.n_hits = n_hits;
  e.p_hat = static_cast<double>(n_hits) / static_cast<double>(n_paths);
  const Interval iv = wilson_interval(n_hits, n_paths);
  e.ci_low = iv.low;
  e.ci_high = iv.high;
  e.margin = margin;
  e.grid_description = describe_grid(grid);
  return e;
}

std::vector<HitProbEstimate> estimate_hit_probs(const PathSource& src, const std::vector<CompactSet>& sets,
                                                const std::vector<double>& margins, const Window& w,
                                                std::size_t n_paths, std::uint64_t seed, Execution exec) {
  check_window(w);
  if (n_paths == 0) throw std::invalid_argument("estimate_hit_prob: n_paths must be >= 1");
  if (sets.size() != margins.size()) throw std::invalid_argument("estimate_hit_prob: one margin per set");
  for (const auto& s : sets)
    if (s.dim() != src.dim()) throw std::invalid_argument("estimate_hit_prob: set and field dimensions differ");
  for (double m : margins)
    if (!(m >= 0.0)) throw std::invalid_argument("estimate_hit_prob: margin must be >= 0");
  const auto nodes = window_nodes(src.grid(), w.a, w.b);
  const auto dists = map_paths(
      src, n_paths, seed,
      [&](std::size_t, const FieldPath& p) {
        std::vector<double> out(sets.size());
        for (std::size_t s = 0; s < sets.size(); ++s) out[s] = min_distance_squared(p, nodes, sets[s]);
        return out;
      },
      exec);
  std::vector<HitProbEstimate> out;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const double m2 = margins[s] * margins[s];
    std::size_t count = 0;
    for (const auto& d : dists) count += d[s] <= m2;
    out.push_back(make_estimate(count, n_paths, margins[s], src.grid()));
  }
  return out;
}

HitProbEstimate estimate_hit_prob(const PathSource& src, const CompactSet& set, const Window& w, std::size_t n_paths,
                                  double margin, std::uint64_t seed, Execution exec) {
  return estimate_hit_probs(src, {set}, {margin}, w, n_paths, seed, exec).front();
}

ScalingReport scaling_experiment(const PathSource& src, const std::vector<double>& center,
                                 const std::vector<double>& radii, const Window& w, std::size_t n_paths,
                                 const MarginPolicy& policy, std::uint64_t seed, Execution exec) {
  check_window(w);
  if (n_paths == 0) throw std::invalid_argument("scaling: n_paths must be >= 1");
  if (center.size() != static_cast<std::size_t>(src.dim())) throw std::invalid_argument("scaling: center has wrong dimension");
  if (radii.empty()) throw std::invalid_argument("scaling: no radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw std::invalid_argument("scaling: radii must be > 0");
    if (i && !(radii[i] > radii[i - 1])) throw std::invalid_argument("scaling: radii must increase");
  }

  ScalingReport rep;
  rep.radii = radii;
  rep.margin = policy.margin(src.grid(), w, noise_scale(src));
  rep.margin_policy = policy.describe();

  const auto nodes = window_nodes(src.grid(), w.a, w.b);
  const CompactSet point = CompactSet::point(center);
  // hit(r) <=> min distance to the center <= r + margin, so one pass serves every radius
  const auto dists = map_paths(
      src, n_paths, seed, [&](std::size_t, const FieldPath& p) { return min_distance(p, nodes, point); }, exec);

  const double lo = 20.0 / static_cast<double>(n_paths);
  std::vector<double> lx, ly;
  for (double r : radii) {
    std::size_t count = 0;
    for (double d : dists) count += d <= r + rep.margin;
    const auto e = make_estimate(count, n_paths, rep.margin, src.grid());
    const bool keep = e.p_hat >= lo && e.p_hat <= 1.0 - lo;
    rep.estimates.push_back(e);
    rep.retained.push_back(keep);
    if (keep) {
      lx.push_back(std::log(r));
      ly.push_back(std::log(e.p_hat));
    }
  }
  rep.sufficient = lx.size() >= 3;
  if (lx.size() >= 2) {
    const LineFit f = fit_line(lx, ly);
    rep.slope = f.slope;
    rep.slope_stderr = f.slope_stderr;
    rep.intercept = f.intercept;
  }
  return rep;
}

}  // namespace sheetcap
