#include "sheetcap/spde.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sheetcap/detail/rectangle.hpp"
#include "sheetcap/gaussian_fields.hpp"
#include "sheetcap/rng.hpp"

namespace sheetcap {

void Coefficients::validate() const {
  if (dim < 1) throw std::invalid_argument("coefficients: dim must be >= 1");
  if (!sigma) throw std::invalid_argument("coefficients: sigma missing");
  if (x0.size() != static_cast<std::size_t>(dim)) throw std::invalid_argument("coefficients: x0 has wrong length");
  if (!(ellipticity_rho > 0.0) || !(uniform_bound_T > 0.0) || !(drift_bound_N >= 0.0))
    throw std::invalid_argument("coefficients: declared constants must be positive");
}

Coefficients constant_diagonal(int d, double rho) {
  if (d < 1 || !(rho > 0.0)) throw std::invalid_argument("constant_diagonal: need d >= 1, rho > 0");
  Coefficients c;
  c.dim = d;
  c.sigma = [d, rho](std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (int i = 0; i < d; ++i) out[static_cast<std::size_t>(i * d + i)] = rho;
  };
  c.x0.assign(static_cast<std::size_t>(d), 0.0);
  c.ellipticity_rho = rho;
  c.uniform_bound_T = rho;
  c.description = "constant_diagonal(rho=" + std::to_string(rho) + ")";
  return c;
}

Coefficients perturbed_identity(int d, double rho, double eps) {
  if (d < 1 || !(rho > 0.0)) throw std::invalid_argument("perturbed_identity: need d >= 1, rho > 0");
  if (eps < 0.0) eps = rho / (2.0 * d);
  if (eps * d > rho / 2.0 + 1e-15) throw std::invalid_argument("perturbed_identity: eps too large for rho/2 ellipticity");
  Coefficients c;
  c.dim = d;
  c.sigma = [d, rho, eps](std::span<const double> x, std::span<double> out) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const double phase = 0.3 * (i - j) + 0.2 * (i + j + 1);
        const double s = std::tanh(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)] + phase);
        out[static_cast<std::size_t>(i * d + j)] = (i == j ? rho : 0.0) + eps * s;
      }
    }
  };
  c.x0.assign(static_cast<std::size_t>(d), 0.0);
  // |sigma xi| >= rho - eps |S|_F >= rho - eps d >= rho / 2
  c.ellipticity_rho = rho / 2.0;
  c.uniform_bound_T = rho + eps;
  c.description = "perturbed_identity(rho=" + std::to_string(rho) + ",eps=" + std::to_string(eps) + ")";
  return c;
}

Coefficients with_constant_drift(Coefficients base, std::vector<double> c) {
  if (c.size() != static_cast<std::size_t>(base.dim)) throw std::invalid_argument("with_constant_drift: wrong length");
  double bound = 0.0;
  for (double v : c) bound = std::max(bound, std::abs(v));
  base.drift = [c](std::span<const double>, std::span<double> out) { std::copy(c.begin(), c.end(), out.begin()); };
  base.drift_bound_N = bound;
  base.description += "+drift";
  return base;
}

Coefficients without_drift(Coefficients base) {
  base.drift = nullptr;
  base.drift_bound_N = 0.0;
  return base;
}

CoefficientCheck spot_check(const Coefficients& c, std::size_t n, std::uint64_t seed, double radius) {
  c.validate();
  const std::size_t d = static_cast<std::size_t>(c.dim);
  Engine eng(seed);
  std::uniform_real_distribution<double> unif(-radius, radius);
  std::normal_distribution<double> gauss;
  std::vector<double> x(d), xi(d), s(d * d), b(d);
  CoefficientCheck out;
  out.min_ellipticity = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < n; ++r) {
    for (auto& v : x) v = unif(eng);
    double nrm = 0.0;
    for (auto& v : xi) {
      v = gauss(eng);
      nrm += v * v;
    }
    nrm = std::sqrt(nrm);
    for (auto& v : xi) v /= nrm;
    c.sigma(x, s);
    // |sum_i sigma_k^i xi^i| over k
    double q = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += s[i * d + k] * xi[i];
      q += acc * acc;
    }
    out.min_ellipticity = std::min(out.min_ellipticity, std::sqrt(q));
    for (double v : s) out.max_entry = std::max(out.max_entry, std::abs(v));
    if (c.drift) {
      c.drift(x, b);
      for (double v : b) out.max_drift = std::max(out.max_drift, std::abs(v));
    }
  }
  out.ok = out.min_ellipticity >= c.ellipticity_rho * (1.0 - 1e-12) &&
           out.max_entry <= c.uniform_bound_T * (1.0 + 1e-12) && out.max_drift <= c.drift_bound_N * (1.0 + 1e-12);
  return out;
}

// ---------------------------------------------------------------------------

void solve_in_place(const Coefficients& coeffs, FieldPath& out, SpdeWorkspace& ws, std::size_t frozen_i,
                    std::size_t frozen_j) {
  const Grid& grid = out.grid;
  if (grid.params() != 2) throw std::invalid_argument("spde: grid must have two parameters");
  const std::size_t d = static_cast<std::size_t>(coeffs.dim);
  if (out.d != coeffs.dim) throw std::invalid_argument("spde: noise dimension does not match coefficients");
  if (out.increments.size() != grid.cell_count() * d) throw std::invalid_argument("spde: noise increments missing");

  const auto& ax0 = grid.axis(0);
  const auto& ax1 = grid.axis(1);
  const std::size_t n0 = ax0.size(), n1 = ax1.size();
  const std::size_t total = grid.node_count() * d;
  const bool has_drift = static_cast<bool>(coeffs.drift);
  const bool fresh = frozen_i == 0 && frozen_j == 0;

  out.values.resize(total);
  if (fresh || ws.martingale.size() != total) {
    ws.martingale.assign(total, 0.0);
    ws.drift_part.assign(total, 0.0);
    for (std::size_t node = 0; node < grid.node_count(); ++node)
      for (std::size_t k = 0; k < d; ++k) out.values[node * d + k] = coeffs.x0[k];
  }
  ws.sigma.resize(d * d);
  ws.drift.resize(d);
  ws.step.resize(d);

  double* m = ws.martingale.data();
  double* a = ws.drift_part.data();
  double* x = out.values.data();
  const double* inc = out.increments.data();

  for (std::size_t i = 1; i < n0; ++i) {
    const double w0 = ax0[i] - ax0[i - 1];
    for (std::size_t j = 1; j < n1; ++j) {
      if (i <= frozen_i && j <= frozen_j) continue;
      const std::size_t here = (i * n1 + j) * d;
      const std::size_t left = (i * n1 + j - 1) * d;
      const std::size_t below = ((i - 1) * n1 + j) * d;
      const std::size_t corner = ((i - 1) * n1 + j - 1) * d;
      const double* dw = inc + ((i - 1) * (n1 - 1) + (j - 1)) * d;
      const std::span<const double> state(x + corner, d);

      coeffs.sigma(state, ws.sigma);
      for (std::size_t k = 0; k < d; ++k) {
        double acc = 0.0;
        for (std::size_t l = 0; l < d; ++l) acc += ws.sigma[k * d + l] * dw[l];
        ws.step[k] = acc;
      }
      for (std::size_t k = 0; k < d; ++k)
        m[here + k] = detail::rectangle_step(m[left + k], m[below + k], m[corner + k], ws.step[k]);

      if (has_drift) {
        const double area = w0 * (ax1[j] - ax1[j - 1]);
        coeffs.drift(state, ws.drift);
        for (std::size_t k = 0; k < d; ++k)
          a[here + k] = detail::rectangle_step(a[left + k], a[below + k], a[corner + k], ws.drift[k] * area);
      }
      for (std::size_t k = 0; k < d; ++k) {
        const double v = (coeffs.x0[k] + m[here + k]) + a[here + k];
        if (!std::isfinite(v)) {
          throw SpdeError("spde: non-finite state in cell (" + std::to_string(i - 1) + "," + std::to_string(j - 1) +
                          "), coordinate " + std::to_string(k));
        }
        x[here + k] = v;
      }
    }
  }
}

FieldPath solve(const Coefficients& coeffs, const Grid& grid, const FieldPath& noise) {
  coeffs.validate();
  if (!(noise.grid == grid)) throw std::invalid_argument("spde: noise grid does not match");
  if (!noise.has_increments()) throw std::invalid_argument("spde: noise path carries no increments");
  FieldPath out;
  out.grid = grid;
  out.d = coeffs.dim;
  out.increments = noise.increments;
  SpdeWorkspace ws;
  solve_in_place(coeffs, out, ws);
  return out;
}

FieldPath solve(const Coefficients& coeffs, const Grid& grid, std::uint64_t seed) {
  coeffs.validate();
  FieldPath out;
  out.grid = grid;
  out.d = coeffs.dim;
  out.increments.resize(grid.cell_count() * static_cast<std::size_t>(coeffs.dim));
  draw_sheet_increments(grid, coeffs.dim, seed, out.increments);
  SpdeWorkspace ws;
  solve_in_place(coeffs, out, ws);
  return out;
}

namespace {

struct FrozenIndex {
  std::size_t i, j;
};

FrozenIndex check_frozen(const Grid& grid, std::span<const std::size_t> s_node) {
  if (grid.params() != 2 || s_node.size() != 2) throw std::invalid_argument("continuation: planar grid required");
  if (s_node[0] >= grid.nodes_along(0) || s_node[1] >= grid.nodes_along(1))
    throw std::invalid_argument("continuation: s is not a node of the grid");
  return {s_node[0], s_node[1]};
}

// Fresh increments from `seed`, overwritten by `base` on the cells of [0, s].
void splice_increments(const Grid& grid, std::size_t d, FrozenIndex s, std::span<const double> base,
                       std::uint64_t seed, std::vector<double>& out) {
  out.resize(grid.cell_count() * d);
  draw_sheet_increments(grid, static_cast<int>(d), seed, out);
  const std::size_t c1 = grid.nodes_along(1) - 1;
  for (std::size_t i = 0; i < s.i; ++i) {
    const std::size_t off = i * c1 * d;
    std::copy(base.begin() + static_cast<std::ptrdiff_t>(off),
              base.begin() + static_cast<std::ptrdiff_t>(off + s.j * d), out.begin() + static_cast<std::ptrdiff_t>(off));
  }
}

}  // namespace

FieldPath continue_from(const Coefficients& coeffs, const Grid& grid, std::span<const std::size_t> s_node,
                        const FieldPath& base_noise, std::uint64_t seed) {
  coeffs.validate();
  const auto s = check_frozen(grid, s_node);
  if (!(base_noise.grid == grid) || !base_noise.has_increments() || base_noise.d != coeffs.dim)
    throw std::invalid_argument("continue_from: base noise must carry increments on the same grid");
  FieldPath out;
  out.grid = grid;
  out.d = coeffs.dim;
  splice_increments(grid, static_cast<std::size_t>(coeffs.dim), s, base_noise.increments, seed, out.increments);
  SpdeWorkspace ws;
  solve_in_place(coeffs, out, ws);
  return out;
}

Continuation::Continuation(const Coefficients& coeffs, const FieldPath& base_noise, std::span<const std::size_t> s_node)
    : coeffs_(coeffs) {
  coeffs_.validate();
  const auto s = check_frozen(base_noise.grid, s_node);
  if (!base_noise.has_increments() || base_noise.d != coeffs.dim)
    throw std::invalid_argument("continuation: base noise must carry increments");
  si_ = s.i;
  sj_ = s.j;
  base_.grid = base_noise.grid;
  base_.d = coeffs.dim;
  base_.increments = base_noise.increments;
  solve_in_place(coeffs_, base_, base_ws_);
}

void Continuation::sample_into(std::uint64_t seed, FieldPath& out, SpdeWorkspace& ws) const {
  if (!(out.grid == base_.grid)) out.grid = base_.grid;
  out.d = base_.d;
  splice_increments(base_.grid, static_cast<std::size_t>(base_.d), {si_, sj_}, base_.increments, seed,
                    out.increments);
  out.values = base_.values;
  ws.martingale = base_ws_.martingale;
  ws.drift_part = base_ws_.drift_part;
  // Nodes outside [0, s] are all overwritten, so the copied base values only
  // matter inside the frozen rectangle.
  solve_in_place(coeffs_, out, ws, si_, sj_);
}

FieldPath Continuation::sample(std::uint64_t seed) const {
  FieldPath out;
  SpdeWorkspace ws;
  sample_into(seed, out, ws);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Solves A u = b in place (A row-major n x n, destroyed). False when singular.
bool lu_solve(std::span<double> a, std::span<double> b, std::size_t n) {
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  const double tiny = 1e-14 * scale;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (!(std::abs(a[piv * n + col]) > tiny)) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t r = n; r-- > 0;) {
    double acc = b[r];
    for (std::size_t c = r + 1; c < n; ++c) acc -= a[r * n + c] * b[c];
    b[r] = acc / a[r * n + r];
  }
  return true;
}

}  // namespace

double girsanov_weight(const Coefficients& coeffs, const FieldPath& path, std::span<const std::size_t> t_node,
                       GirsanovDirection direction) {
  coeffs.validate();
  if (!path.has_increments()) throw std::invalid_argument("girsanov_weight: path carries no increments");
  if (path.d != coeffs.dim) throw std::invalid_argument("girsanov_weight: dimension mismatch");
  const Grid& grid = path.grid;
  if (grid.params() != 2 || t_node.size() != 2 || t_node[0] >= grid.nodes_along(0) ||
      t_node[1] >= grid.nodes_along(1))
    throw std::invalid_argument("girsanov_weight: t is not a node of a planar grid");
  if (coeffs.drift_free()) return 1.0;

  const std::size_t d = static_cast<std::size_t>(coeffs.dim);
  const auto& ax0 = grid.axis(0);
  const auto& ax1 = grid.axis(1);
  const std::size_t n1 = ax1.size();
  std::vector<double> s(d * d), u(d);
  double stochastic = 0.0, quadratic = 0.0;
  for (std::size_t i = 0; i < t_node[0]; ++i) {
    for (std::size_t j = 0; j < t_node[1]; ++j) {
      const auto state = path.at(i * n1 + j);
      coeffs.sigma(state, s);
      coeffs.drift(state, u);
      if (!lu_solve(s, u, d)) {
        throw SpdeError("girsanov_weight: singular sigma at node (" + std::to_string(i) + "," + std::to_string(j) +
                        ")");
      }
      const double* dw = path.increments.data() + (i * (n1 - 1) + j) * d;
      const double area = (ax0[i + 1] - ax0[i]) * (ax1[j + 1] - ax1[j]);
      double norm2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        stochastic += u[k] * dw[k];
        norm2 += u[k] * u[k];
      }
      quadratic += norm2 * area;
    }
  }
  const double sign = direction == GirsanovDirection::L ? -1.0 : 1.0;
  return std::exp(-stochastic + sign * 0.5 * quadratic);
}

}  // namespace sheetcap
