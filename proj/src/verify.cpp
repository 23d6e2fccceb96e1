#include "sheetcap/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "sheetcap/rng.hpp"

namespace sheetcap {

double ball_volume(int d, double r) {
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0) * std::pow(r, d);
}

// ---------------------------------------------------------------------------

OccupationEstimate occupation_density(const PathSource& src, std::span<const double> x, double h, const Window& w,
                                      std::size_t n_paths, std::uint64_t seed, Execution exec) {
  if (!(h > 0.0)) throw std::invalid_argument("occupation: h must be > 0");
  if (x.size() != static_cast<std::size_t>(src.dim())) throw std::invalid_argument("occupation: x has wrong dimension");
  if (n_paths < 2) throw std::invalid_argument("occupation: need >= 2 paths");
  const auto nodes = window_nodes(src.grid(), w.a, w.b);
  const auto weights = window_weights(src.grid(), w.a, w.b);
  const double vol = ball_volume(src.dim(), h);
  const double h2 = h * h;
  const std::vector<double> target(x.begin(), x.end());
  const auto per_path = map_paths(
      src, n_paths, seed,
      [&](std::size_t, const FieldPath& p) {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          const auto v = p.at(nodes[i]);
          double r2 = 0.0;
          for (std::size_t k = 0; k < v.size(); ++k) r2 += (v[k] - target[k]) * (v[k] - target[k]);
          if (r2 <= h2) acc += weights[i];
        }
        return acc / vol;
      },
      exec);
  const MeanEstimate m = mean_estimate(per_path);
  return {m.mean, m.stderr_, m.ci(), n_paths, h};
}

double expected_occupation(const std::function<double(std::span<const double>)>& variance, std::span<const double> x,
                           const Window& w, int n_params) {
  if (n_params < 1) throw std::invalid_argument("expected occupation: need >= 1 parameter");
  if (!(w.a >= 0.0) || !(w.b > w.a)) throw std::invalid_argument("expected occupation: bad window");
  using rule = boost::math::quadrature::gauss<double, 40>;
  // rule stores the nonnegative abscissas of [-1, 1]; expand to the full set
  std::vector<double> nodes, weights;
  for (std::size_t i = 0; i < rule::abscissa().size(); ++i) {
    const double u = rule::abscissa()[i], wt = rule::weights()[i];
    nodes.push_back(u);
    weights.push_back(wt);
    if (u != 0.0) {
      nodes.push_back(-u);
      weights.push_back(wt);
    }
  }
  const double half = 0.5 * (w.b - w.a), mid = 0.5 * (w.a + w.b);
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  const auto dim = static_cast<double>(x.size());
  const auto n = static_cast<std::size_t>(n_params);
  std::vector<std::size_t> idx(n, 0);
  std::vector<double> t(n);
  double total = 0.0;
  while (true) {
    double wt = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      t[k] = mid + half * nodes[idx[k]];
      wt *= half * weights[idx[k]];
    }
    const double v = variance(t);
    if (!(v > 0.0)) throw std::invalid_argument("expected occupation: variance must be > 0 on the window");
    total += wt * std::exp(-0.5 * r2 / v) / std::pow(2.0 * std::numbers::pi * v, 0.5 * dim);
    std::size_t k = 0;
    while (k < n && ++idx[k] == nodes.size()) idx[k++] = 0;
    if (k == n) break;
  }
  return total;
}

PairOccupationReport pair_occupation_ratio(const PathSource& src,
                                           const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs,
                                           double h, const Window& w, std::size_t n_paths, const RieszKernel& k,
                                           std::uint64_t seed, std::size_t min_joint_hits, Execution exec) {
  if (!(h > 0.0)) throw std::invalid_argument("pair occupation: h must be > 0");
  if (pairs.empty()) throw std::invalid_argument("pair occupation: no pairs");
  if (n_paths < 2) throw std::invalid_argument("pair occupation: need >= 2 paths");
  const auto d = static_cast<std::size_t>(src.dim());
  if (k.dimension() != src.dim()) throw std::invalid_argument("pair occupation: kernel dimension differs");
  for (const auto& [x, y] : pairs) {
    if (x.size() != d || y.size() != d) throw std::invalid_argument("pair occupation: point has wrong dimension");
    if (x == y) throw std::invalid_argument("pair occupation: pairs must be distinct points");
  }
  const auto nodes = window_nodes(src.grid(), w.a, w.b);
  const auto weights = window_weights(src.grid(), w.a, w.b);
  const double vol = ball_volume(src.dim(), h);
  const double h2 = h * h;
  auto occupation = [&](const FieldPath& p, const std::vector<double>& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto v = p.at(nodes[i]);
      double r2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) r2 += (v[c] - x[c]) * (v[c] - x[c]);
      if (r2 <= h2) acc += weights[i];
    }
    return acc / vol;
  };
  const auto per_path = map_paths(
      src, n_paths, seed,
      [&](std::size_t, const FieldPath& p) {
        std::vector<double> out(pairs.size());
        for (std::size_t q = 0; q < pairs.size(); ++q) out[q] = occupation(p, pairs[q].first) * occupation(p, pairs[q].second);
        return out;
      },
      exec);

  PairOccupationReport rep;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::vector<double> column(n_paths);
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    PairRow row;
    row.x = pairs[q].first;
    row.y = pairs[q].second;
    row.separation = distance(row.x, row.y);
    row.kernel_value = k.at_distance(row.separation);
    for (std::size_t i = 0; i < n_paths; ++i) {
      column[i] = per_path[i][q];
      row.joint_hits += column[i] > 0.0;
    }
    const MeanEstimate m = mean_estimate(column);
    row.pair_occupation = m.mean;
    row.stderr_ = m.stderr_;
    row.ratio = m.mean / row.kernel_value;
    row.flagged = row.joint_hits < min_joint_hits || !(row.ratio > 0.0) || !std::isfinite(row.ratio);
    if (!row.flagged) {
      ++rep.usable;
      lo = std::min(lo, row.ratio);
      hi = std::max(hi, row.ratio);
    }
    rep.rows.push_back(std::move(row));
  }
  if (rep.usable > 0) {
    rep.c2_hat = hi;
    rep.stability = hi / lo;
  }
  return rep;
}

// ---------------------------------------------------------------------------

double gaussian_shape(double c, double s, int d, std::span<const double> x) {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return c * std::pow(s, -0.5 * d) * std::exp(-r2 / (c * s));
}

double DensityFitReport::lower_envelope(std::size_t i) const {
  return c_low > 0.0 ? gaussian_shape(c_low, shape_scale, d, {points.data() + i * static_cast<std::size_t>(d),
                                                               static_cast<std::size_t>(d)})
                     : 0.0;
}

double DensityFitReport::upper_envelope(std::size_t i) const {
  return std::isfinite(c_up) ? gaussian_shape(c_up, shape_scale, d, {points.data() + i * static_cast<std::size_t>(d),
                                                                      static_cast<std::size_t>(d)})
                             : std::numeric_limits<double>::infinity();
}

namespace {

// c with gaussian_shape(c, s, d, x) == target; the shape is increasing in c.
double solve_shape(double target, double s, int d, std::span<const double> x) {
  double lo = std::log(1e-12), hi = std::log(1e12);
  if (gaussian_shape(std::exp(hi), s, d, x) < target) return std::exp(hi);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (gaussian_shape(std::exp(mid), s, d, x) < target)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

}  // namespace

DensityFitReport fit_density_bounds(std::span<const double> samples, int d, double shape_scale,
                                    const BandwidthPolicy& policy, const DensityFn& reference, Execution exec) {
  const auto ud = static_cast<std::size_t>(d);
  if (d < 1 || samples.size() % ud != 0) throw std::invalid_argument("density fit: ragged samples");
  if (!(shape_scale > 0.0)) throw std::invalid_argument("density fit: shape scale must be > 0");
  const std::size_t n = samples.size() / ud;
  if (n < 2 * policy.min_samples)
    throw std::invalid_argument("density fit: too few samples for the bandwidth policy (need " +
                                std::to_string(2 * policy.min_samples) + ")");

  DensityFitReport rep;
  rep.d = d;
  rep.shape_scale = shape_scale;
  rep.n_samples = n;
  rep.bandwidth = bandwidths(samples, d, policy);
  rep.bandwidth_policy = policy.describe();
  rep.reach = 3.0 * mean_coordinate_sd(samples, d);
  rep.points = radial_evaluation_set(d, rep.reach);

  const std::size_t na = n / 2, nb = n - na;
  const auto fa = kde(samples.subspan(0, na * ud), d, rep.bandwidth, rep.points, exec);
  const auto fb = kde(samples.subspan(na * ud), d, rep.bandwidth, rep.points, exec);
  const std::size_t m = fa.size();
  rep.density.resize(m);
  rep.budget.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    rep.density[i] = (static_cast<double>(na) * fa[i] + static_cast<double>(nb) * fb[i]) / static_cast<double>(n);
    rep.budget[i] = 0.5 * std::abs(fa[i] - fb[i]);
  }

  rep.c_low = std::numeric_limits<double>::infinity();
  rep.c_up = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::span<const double> x(rep.points.data() + i * ud, ud);
    const double lower = rep.density[i] - rep.budget[i];
    rep.c_low = lower > 0.0 ? std::min(rep.c_low, solve_shape(lower, shape_scale, d, x)) : 0.0;
    rep.c_up = std::max(rep.c_up, solve_shape(rep.density[i] + rep.budget[i], shape_scale, d, x));
  }
  rep.pass_lower = rep.c_low > 0.0 && std::isfinite(rep.c_low);
  rep.pass_upper = std::isfinite(rep.c_up) && rep.c_up < 1e12;
  rep.pass = rep.pass_lower && rep.pass_upper;

  if (reference) {
    rep.reference.resize(m);
    rep.sup_rel_error = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      rep.reference[i] = reference({rep.points.data() + i * ud, ud});
      rep.sup_rel_error = std::max(rep.sup_rel_error, std::abs(rep.density[i] - rep.reference[i]) / rep.reference[i]);
    }
  }
  return rep;
}

DensityFitReport marginal_density_check(const PathSource& src, std::span<const std::size_t> s_node,
                                        std::size_t n_paths, const BandwidthPolicy& policy, std::uint64_t seed,
                                        const DensityFn& reference, Execution exec) {
  const Grid& grid = src.grid();
  if (s_node.size() != static_cast<std::size_t>(grid.params())) throw std::invalid_argument("marginal: bad node index");
  for (int k = 0; k < grid.params(); ++k)
    if (s_node[static_cast<std::size_t>(k)] == 0 || s_node[static_cast<std::size_t>(k)] >= grid.nodes_along(k))
      throw std::invalid_argument("marginal: s must be a grid node off the axes");
  if (n_paths < 2 * policy.min_samples) throw std::invalid_argument("marginal: n_paths too small for the bandwidth policy");
  const std::size_t node = grid.node_index(s_node);
  const auto point = grid.node_point(node);
  double scale = 1.0;
  for (double v : point) scale *= v;

  const auto d = static_cast<std::size_t>(src.dim());
  std::vector<double> samples(n_paths * d);
  map_paths(
      src, n_paths, seed,
      [&](std::size_t i, const FieldPath& p) {
        const auto v = p.at(node);
        std::copy(v.begin(), v.end(), samples.begin() + static_cast<std::ptrdiff_t>(i * d));
        return char{0};
      },
      exec);
  auto rep = fit_density_bounds(samples, src.dim(), scale, policy, reference, exec);
  rep.label = "marginal";
  return rep;
}

std::vector<DensityFitReport> conditional_density_check(const Coefficients& coeffs, const Grid& grid,
                                                        std::span<const std::size_t> s_node,
                                                        std::span<const std::size_t> t_node, std::size_t n_past,
                                                        std::size_t n_cont, const BandwidthPolicy& policy,
                                                        std::uint64_t seed, const DensityFn& reference,
                                                        Execution exec) {
  coeffs.validate();
  if (grid.params() != 2 || s_node.size() != 2 || t_node.size() != 2)
    throw std::invalid_argument("conditional: planar grid and node pairs required");
  for (std::size_t k = 0; k < 2; ++k) {
    if (t_node[k] >= grid.nodes_along(static_cast<int>(k)) || s_node[k] == 0)
      throw std::invalid_argument("conditional: s and t must be grid nodes off the axes");
    if (t_node[k] < s_node[k]) throw std::invalid_argument("conditional: need s <= t componentwise");
  }
  if (s_node[0] == t_node[0] && s_node[1] == t_node[1]) throw std::invalid_argument("conditional: need s != t");
  if (n_past == 0) throw std::invalid_argument("conditional: n_past must be >= 1");
  if (n_cont < 2 * policy.min_samples) throw std::invalid_argument("conditional: n_cont too small for the bandwidth policy");

  const std::size_t sn = grid.node_index(s_node), tn = grid.node_index(t_node);
  const auto sp = grid.node_point(sn), tp = grid.node_point(tn);
  const double sep = distance(sp, tp);
  const auto d = static_cast<std::size_t>(coeffs.dim);

  std::vector<DensityFitReport> out;
  for (std::size_t past = 0; past < n_past; ++past) {
    FieldPath base;
    base.grid = grid;
    base.d = coeffs.dim;
    base.increments.resize(grid.cell_count() * d);
    draw_sheet_increments(grid, coeffs.dim, derive_seed(seed, past, 1), base.increments);
    const Continuation cont(coeffs, base, s_node);

    std::vector<double> samples(n_cont * d);
    if (exec == Execution::Parallel) {
#pragma omp parallel num_threads(worker_count())
      {
        FieldPath path;
        SpdeWorkspace ws;
#pragma omp for schedule(dynamic, 256)
        for (std::size_t c = 0; c < n_cont; ++c) {
          cont.sample_into(derive_seed(seed, c, 2 + past), path, ws);
          for (std::size_t k = 0; k < d; ++k) samples[c * d + k] = path.values[tn * d + k] - path.values[sn * d + k];
        }
      }
    } else {
      FieldPath path;
      SpdeWorkspace ws;
      for (std::size_t c = 0; c < n_cont; ++c) {
        cont.sample_into(derive_seed(seed, c, 2 + past), path, ws);
        for (std::size_t k = 0; k < d; ++k) samples[c * d + k] = path.values[tn * d + k] - path.values[sn * d + k];
      }
    }
    auto rep = fit_density_bounds(samples, coeffs.dim, sep, policy, reference, exec);
    rep.label = "past " + std::to_string(past);
    out.push_back(std::move(rep));
  }
  return out;
}

EnvelopeRate envelope_rate(const std::vector<double>& separations, const std::vector<double>& c_up, int d,
                           double tolerance) {
  if (separations.size() != c_up.size() || separations.size() < 2)
    throw std::invalid_argument("envelope rate: need >= 2 paired values");
  EnvelopeRate r;
  r.separations = separations;
  r.expected = -0.5 * d;
  r.tolerance = tolerance;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < separations.size(); ++i) {
    const double e = c_up[i] * std::pow(separations[i], -0.5 * d);
    r.envelopes.push_back(e);
    lx.push_back(std::log(separations[i]));
    ly.push_back(std::log(e));
  }
  const LineFit f = fit_line(lx, ly);
  r.slope = f.slope;
  r.slope_stderr = f.slope_stderr;
  r.pass = std::abs(r.slope - r.expected) <= tolerance * std::abs(r.expected);
  return r;
}

// ---------------------------------------------------------------------------

namespace {

struct GirsanovSample {
  double hit_drifted = 0.0;
  double weighted = 0.0;
  double l = 0.0;
};

}  // namespace

GirsanovReport girsanov_crosscheck(const Coefficients& coeffs_with_drift, const Grid& grid, const CompactSet& set,
                                   const Window& w, std::size_t n_paths, double margin, std::uint64_t seed,
                                   Execution exec) {
  coeffs_with_drift.validate();
  if (grid.params() != 2) throw std::invalid_argument("girsanov: planar grid required");
  if (set.dim() != coeffs_with_drift.dim) throw std::invalid_argument("girsanov: set dimension differs");
  if (n_paths < 2) throw std::invalid_argument("girsanov: need >= 2 paths");
  if (!(margin >= 0.0)) throw std::invalid_argument("girsanov: margin must be >= 0");
  const auto nodes = window_nodes(grid, w.a, w.b);
  const long ti = grid.find_node(0, w.b), tj = grid.find_node(1, w.b);
  const std::size_t t_node[2] = {static_cast<std::size_t>(ti), static_cast<std::size_t>(tj)};
  const Coefficients drift_free = without_drift(coeffs_with_drift);
  const auto d = static_cast<std::size_t>(coeffs_with_drift.dim);
  const double m2 = margin * margin;

  std::vector<GirsanovSample> samples(n_paths);
  auto one = [&](std::size_t i, FieldPath& x, FieldPath& y, SpdeWorkspace& ws) {
    x.grid = grid;
    x.d = coeffs_with_drift.dim;
    x.increments.resize(grid.cell_count() * d);
    draw_sheet_increments(grid, x.d, derive_seed(seed, i), x.increments);
    solve_in_place(drift_free, x, ws);
    y.grid = grid;
    y.d = x.d;
    y.increments = x.increments;
    solve_in_place(coeffs_with_drift, y, ws);
    auto hit = [&](const FieldPath& p) {
      for (std::size_t node : nodes)
        if (set.distance_squared(p.at(node)) <= m2) return true;
      return false;
    };
    GirsanovSample s;
    s.hit_drifted = hit(y) ? 1.0 : 0.0;
    if (hit(x)) s.weighted = 1.0 / girsanov_weight(coeffs_with_drift, x, t_node, GirsanovDirection::J);
    s.l = girsanov_weight(coeffs_with_drift, y, t_node, GirsanovDirection::L);
    samples[i] = s;
  };
  if (exec == Execution::Parallel) {
#pragma omp parallel num_threads(worker_count())
    {
      FieldPath x, y;
      SpdeWorkspace ws;
#pragma omp for schedule(dynamic, 4)
      for (std::size_t i = 0; i < n_paths; ++i) one(i, x, y, ws);
    }
  } else {
    FieldPath x, y;
    SpdeWorkspace ws;
    for (std::size_t i = 0; i < n_paths; ++i) one(i, x, y, ws);
  }

  std::vector<double> a(n_paths), b(n_paths), diff(n_paths), l(n_paths);
  std::size_t a_hits = 0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    a[i] = samples[i].hit_drifted;
    a_hits += a[i] > 0.0;
    b[i] = samples[i].weighted;
    diff[i] = a[i] - b[i];
    l[i] = samples[i].l;
  }
  const MeanEstimate ea = mean_estimate(a), eb = mean_estimate(b), ed = mean_estimate(diff), el = mean_estimate(l);
  GirsanovReport r;
  r.n_paths = n_paths;
  r.margin = margin;
  r.a = ea.mean;
  r.a_stderr = ea.stderr_;
  r.a_ci = wilson_interval(a_hits, n_paths);
  r.b = eb.mean;
  r.b_stderr = eb.stderr_;
  r.difference = ea.mean - eb.mean;
  r.combined_stderr = std::hypot(ea.stderr_, eb.stderr_);
  r.paired_stderr = ed.stderr_;
  r.z = r.combined_stderr > 0.0 ? r.difference / r.combined_stderr : 0.0;
  r.l_mean = el.mean;
  r.l_stderr = el.stderr_;
  r.pass_identity = std::abs(r.difference) <= 3.0 * r.combined_stderr;
  r.pass_l = std::abs(r.l_mean - 1.0) <= 4.0 * r.l_stderr;
  return r;
}

// ---------------------------------------------------------------------------

double phi_value(double alpha, double beta, int n, double r) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("phi: alpha must lie in (0, 1)");
  if (n < 1) throw std::invalid_argument("phi: N must be >= 1");
  if (!(r >= 0.0)) throw std::invalid_argument("phi: r must be >= 0");
  if (r == 0.0) return 0.0;
  const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
  // rho = e^u; exp(-rho^(-2 alpha)) underflows below u_min
  const double u_min = -std::log(750.0) / (2.0 * alpha);
  const double u_max = std::log(r);
  if (u_max <= u_min) return 0.0;
  auto f = [&](double u) { return std::exp((n - beta) * u - std::exp(-2.0 * alpha * u)); };
  double err = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, u_min, u_max, 20, 1e-12, &err);
  if (!(err <= 1e-8 * std::abs(value) + 1e-300)) throw std::runtime_error("phi: quadrature did not converge");
  return sphere * value;
}

PhiReport phi_check(double alpha, double beta, int n, const std::vector<double>& r_values, double r0) {
  if (r_values.size() < 2) throw std::invalid_argument("phi: need >= 2 radii");
  for (std::size_t i = 0; i < r_values.size(); ++i) {
    if (r_values[i] < r0) throw std::invalid_argument("phi: radii must be >= r0");
    if (i && !(r_values[i] > r_values[i - 1])) throw std::invalid_argument("phi: radii must increase");
  }
  PhiReport rep;
  rep.alpha = alpha;
  rep.beta = beta;
  rep.n = n;
  rep.r = r_values;
  for (double r : r_values) rep.phi.push_back(phi_value(alpha, beta, n, r));

  const double r_last = r_values.back();
  if (beta > n) {
    rep.regime = "bounded";
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < r_values.size(); ++i)
      if (r_values[i] >= r_last / 10.0 * (1.0 - 1e-12)) {
        lo = std::min(lo, rep.phi[i]);
        hi = std::max(hi, rep.phi[i]);
      }
    rep.variation = (hi - lo) / hi;
    rep.pass = rep.variation < 0.05;
  } else if (beta == n) {
    rep.regime = "log";
    // least-squares coefficient of ln r on each decade [r_last / 10^(k+1), r_last / 10^k]
    for (double top = r_last; top / 10.0 >= r_values.front() * (1.0 - 1e-12); top /= 10.0) {
      std::vector<double> x, y;
      for (std::size_t i = 0; i < r_values.size(); ++i)
        if (r_values[i] >= top / 10.0 * (1.0 - 1e-12) && r_values[i] <= top * (1.0 + 1e-12)) {
          x.push_back(std::log(r_values[i]));
          y.push_back(rep.phi[i]);
        }
      if (x.size() >= 2) rep.decade_slopes.insert(rep.decade_slopes.begin(), fit_line(x, y).slope);
    }
    if (rep.decade_slopes.size() >= 2) {
      const double a = rep.decade_slopes[rep.decade_slopes.size() - 2], b = rep.decade_slopes.back();
      rep.pass = std::abs(a - b) <= 0.1 * std::abs(b);
    }
  } else {
    rep.regime = "growing";
    rep.pass = true;
  }
  return rep;
}

// ---------------------------------------------------------------------------

SandwichReport sandwich_report(const std::vector<std::string>& ids, const std::vector<CapacityResult>& capacities,
                               const std::vector<HitProbEstimate>& hits, double ceiling) {
  if (capacities.size() != hits.size() || ids.size() != hits.size())
    throw std::invalid_argument("sandwich: ids, capacities and hits must have equal length");
  if (hits.empty()) throw std::invalid_argument("sandwich: no sets");
  SandwichReport rep;
  rep.ceiling = ceiling;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::size_t positive = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    SandwichRow row;
    row.id = ids[i];
    row.capacity = capacities[i].value;
    row.p_hat = hits[i].p_hat;
    row.ci_low = hits[i].ci_low;
    row.ci_high = hits[i].ci_high;
    row.n_paths = hits[i].n_paths;
    row.polar = row.capacity == 0.0;
    if (row.polar) {
      const bool consistent_with_zero =
          row.ci_low == 0.0 && row.p_hat <= 5.0 / static_cast<double>(std::max<std::size_t>(row.n_paths, 1));
      row.polarity_violation = !consistent_with_zero;
      rep.violations += row.polarity_violation;
    } else {
      row.ratio = row.p_hat / row.capacity;
      ++positive;
      lo = std::min(lo, row.ratio);
      hi = std::max(hi, row.ratio);
    }
    rep.rows.push_back(std::move(row));
  }
  if (positive > 0 && lo > 0.0) {
    rep.band = hi / lo;
    rep.k_fit = std::max(hi, 1.0 / lo);
  } else {
    rep.band = std::numeric_limits<double>::infinity();
    rep.k_fit = std::numeric_limits<double>::infinity();
  }
  rep.pass = positive > 0 && rep.band <= ceiling && rep.violations == 0;
  return rep;
}

}  // namespace sheetcap
