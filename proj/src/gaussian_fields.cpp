#include "sheetcap/gaussian_fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "sheetcap/rng.hpp"
#include "sheetcap/stats.hpp"
#include "sheetcap/detail/rectangle.hpp"

namespace sheetcap {

std::string to_string(FieldFamily f) {
  switch (f) {
    case FieldFamily::BrownianSheet: return "sheet";
    case FieldFamily::OUSheet: return "ou";
    case FieldFamily::FBmSheet: return "fbm";
  }
  return "?";
}

FieldFamily parse_family(const std::string& name) {
  if (name == "sheet" || name == "brownian" || name == "brownian_sheet") return FieldFamily::BrownianSheet;
  if (name == "ou" || name == "ou_sheet") return FieldFamily::OUSheet;
  if (name == "fbm" || name == "fbm_sheet") return FieldFamily::FBmSheet;
  throw std::invalid_argument("unknown field model '" + name + "' (expected sheet, ou or fbm)");
}

CovarianceModel CovarianceModel::fbm_sheet(double hurst, double scale) {
  CovarianceModel m{FieldFamily::FBmSheet, hurst, scale};
  m.validate();
  return m;
}

void CovarianceModel::validate() const {
  if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("covariance model: hurst must lie in (0,1)");
  if (!(fbm_scale > 0.0) || !std::isfinite(fbm_scale))
    throw std::invalid_argument("covariance model: fbm_scale must be positive");
}

double covariance(const CovarianceModel& model, std::span<const double> s, std::span<const double> t) {
  if (s.size() != t.size()) throw std::invalid_argument("covariance: parameter dimension mismatch");
  switch (model.family) {
    case FieldFamily::BrownianSheet: {
      double c = 1.0;
      for (std::size_t k = 0; k < s.size(); ++k) c *= std::min(s[k], t[k]);
      return c;
    }
    case FieldFamily::OUSheet: {
      double l1 = 0.0;
      for (std::size_t k = 0; k < s.size(); ++k) l1 += std::abs(t[k] - s[k]);
      return std::exp(-0.5 * l1);
    }
    case FieldFamily::FBmSheet: {
      const double h2 = 2.0 * model.hurst;
      double c = 1.0;
      for (std::size_t k = 0; k < s.size(); ++k) {
        c *= 0.5 * model.fbm_scale *
             (std::pow(s[k], h2) + std::pow(t[k], h2) - std::pow(std::abs(t[k] - s[k]), h2));
      }
      return c;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Brownian sheet construction

void draw_sheet_increments(const Grid& grid, int d, std::uint64_t seed, std::span<double> increments) {
  const std::size_t ud = static_cast<std::size_t>(d);
  if (increments.size() != grid.cell_count() * ud) throw std::invalid_argument("draw_sheet_increments: size mismatch");
  NormalSource normal(seed);
  const int n = grid.params();
  if (n == 2) {
    const auto& ax0 = grid.axis(0);
    const auto& ax1 = grid.axis(1);
    std::vector<double> sd1(ax1.size() - 1);
    for (std::size_t j = 0; j + 1 < ax1.size(); ++j) sd1[j] = std::sqrt(ax1[j + 1] - ax1[j]);
    double* out = increments.data();
    for (std::size_t i = 0; i + 1 < ax0.size(); ++i) {
      const double sd0 = std::sqrt(ax0[i + 1] - ax0[i]);
      for (std::size_t j = 0; j + 1 < ax1.size(); ++j) {
        const double sd = sd0 * sd1[j];
        for (std::size_t k = 0; k < ud; ++k) *out++ = sd * normal();
      }
    }
    return;
  }
  std::vector<std::size_t> cell_dims(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) cell_dims[static_cast<std::size_t>(k)] = grid.nodes_along(k) - 1;
  std::vector<std::size_t> multi(static_cast<std::size_t>(n), 0);
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const double sd = std::sqrt(grid.cell_volume(multi));
    for (std::size_t k = 0; k < ud; ++k) increments[c * ud + k] = sd * normal();
    for (std::size_t a = multi.size(); a-- > 0;) {
      if (++multi[a] < cell_dims[a]) break;
      multi[a] = 0;
    }
  }
}

void integrate_increments(const Grid& grid, int d, std::span<const double> increments, std::span<double> values) {
  const std::size_t ud = static_cast<std::size_t>(d);
  if (increments.size() != grid.cell_count() * ud || values.size() != grid.node_count() * ud)
    throw std::invalid_argument("integrate_increments: size mismatch");
  const int n = grid.params();
  if (n == 2) {
    const std::size_t n0 = grid.nodes_along(0), n1 = grid.nodes_along(1);
    std::fill(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n1 * ud), 0.0);
    for (std::size_t i = 1; i < n0; ++i) {
      double* row = values.data() + i * n1 * ud;
      const double* prev = row - n1 * ud;
      const double* inc = increments.data() + (i - 1) * (n1 - 1) * ud;
      for (std::size_t k = 0; k < ud; ++k) row[k] = 0.0;
      for (std::size_t j = 1; j < n1; ++j) {
        for (std::size_t k = 0; k < ud; ++k) {
          row[j * ud + k] = detail::rectangle_step(row[(j - 1) * ud + k], prev[j * ud + k],
                                                   prev[(j - 1) * ud + k], inc[(j - 1) * ud + k]);
        }
      }
    }
    return;
  }
  // General N: scatter each cell's increment onto its upper node, then
  // prefix-sum along every axis in turn.
  std::fill(values.begin(), values.end(), 0.0);
  std::vector<std::size_t> multi(static_cast<std::size_t>(n), 0), node(static_cast<std::size_t>(n));
  std::vector<std::size_t> cell_dims(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) cell_dims[static_cast<std::size_t>(k)] = grid.nodes_along(k) - 1;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    for (std::size_t a = 0; a < node.size(); ++a) node[a] = multi[a] + 1;
    const std::size_t dst = grid.node_index(node) * ud;
    for (std::size_t k = 0; k < ud; ++k) values[dst + k] = increments[c * ud + k];
    for (std::size_t a = multi.size(); a-- > 0;) {
      if (++multi[a] < cell_dims[a]) break;
      multi[a] = 0;
    }
  }
  std::size_t stride = ud;  // stride of the last axis in the flat array
  for (int a = n - 1; a >= 0; --a) {
    const std::size_t len = grid.nodes_along(a);
    const std::size_t block = stride * len;
    for (std::size_t base = 0; base < values.size(); base += block) {
      for (std::size_t off = 0; off < stride; ++off) {
        for (std::size_t i = 1; i < len; ++i) values[base + off + i * stride] += values[base + off + (i - 1) * stride];
      }
    }
    stride = block;
  }
}

Eigen::MatrixXd fbm_axis_factor(std::span<const double> axis_nodes, double hurst, double scale) {
  const std::size_t m = axis_nodes.size();
  const double h2 = 2.0 * hurst;
  Eigen::MatrixXd cov(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double ti = axis_nodes[i], tj = axis_nodes[j];
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          0.5 * scale * (std::pow(ti, h2) + std::pow(tj, h2) - std::pow(std::abs(ti - tj), h2));
    }
  }
  const double jitter = 1e-12 * cov.diagonal().maxCoeff();
  cov.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("fbm: axis covariance not positive definite after jitter " + std::to_string(jitter) +
                             " (" + std::to_string(m) + " nodes, H=" + std::to_string(hurst) +
                             "); coarsen the axis or move nodes apart");
  }
  return llt.matrixL();
}

// ---------------------------------------------------------------------------

GaussianSampler::GaussianSampler(CovarianceModel model, Grid grid, int d)
    : model_(model), grid_(std::move(grid)), d_(d) {
  model_.validate();
  if (d_ < 1) throw std::invalid_argument("simulate: d must be >= 1");
  if (model_.family == FieldFamily::OUSheet) {
    std::vector<std::vector<double>> axes;
    for (const auto& ax : grid_.axes()) {
      std::vector<double> mapped{0.0};
      for (double t : ax) mapped.push_back(std::exp(t));
      axes.push_back(std::move(mapped));
    }
    brownian_grid_ = Grid(std::move(axes));
  } else if (model_.family == FieldFamily::FBmSheet) {
    for (const auto& ax : grid_.axes()) {
      if (ax.size() > kMaxFbmAxisNodes)
        throw std::invalid_argument("fbm: at most " + std::to_string(kMaxFbmAxisNodes) + " nodes per axis");
      factor_.push_back(fbm_axis_factor(std::span<const double>(ax).subspan(1), model_.hurst, model_.fbm_scale));
    }
  }
}

FieldPath GaussianSampler::sample(std::uint64_t seed) const {
  FieldPath out;
  sample_into(seed, out);
  return out;
}

void GaussianSampler::sample_into(std::uint64_t seed, FieldPath& out) const {
  const std::size_t ud = static_cast<std::size_t>(d_);
  if (!(out.grid == grid_)) out.grid = grid_;
  out.d = d_;
  out.values.resize(grid_.node_count() * ud);

  switch (model_.family) {
    case FieldFamily::BrownianSheet: {
      out.increments.resize(grid_.cell_count() * ud);
      draw_sheet_increments(grid_, d_, seed, out.increments);
      integrate_increments(grid_, d_, out.increments, out.values);
      return;
    }
    case FieldFamily::OUSheet: {
      out.increments.clear();
      std::vector<double> inc(brownian_grid_.cell_count() * ud);
      std::vector<double> w(brownian_grid_.node_count() * ud);
      draw_sheet_increments(brownian_grid_, d_, seed, inc);
      integrate_increments(brownian_grid_, d_, inc, w);
      std::vector<std::size_t> shifted(static_cast<std::size_t>(grid_.params()));
      for (std::size_t node = 0; node < grid_.node_count(); ++node) {
        const auto multi = grid_.node_multi(node);
        double l1 = 0.0;
        for (std::size_t a = 0; a < multi.size(); ++a) {
          l1 += grid_.axis(static_cast<int>(a))[multi[a]];
          shifted[a] = multi[a] + 1;
        }
        const double scale = std::exp(-0.5 * l1);
        const std::size_t src = brownian_grid_.node_index(shifted) * ud;
        for (std::size_t k = 0; k < ud; ++k) out.values[node * ud + k] = scale * w[src + k];
      }
      return;
    }
    case FieldFamily::FBmSheet: {
      out.increments.clear();
      NormalSource normal(seed);
      const int n = grid_.params();
      std::fill(out.values.begin(), out.values.end(), 0.0);
      if (n == 2) {
        const auto m0 = factor_[0].rows(), m1 = factor_[1].rows();
        const std::size_t n1 = grid_.nodes_along(1);
        Eigen::MatrixXd z(m0, m1);
        for (std::size_t k = 0; k < ud; ++k) {
          for (Eigen::Index i = 0; i < m0; ++i)
            for (Eigen::Index j = 0; j < m1; ++j) z(i, j) = normal();
          const Eigen::MatrixXd y = (factor_[0].triangularView<Eigen::Lower>() * z) *
                                    factor_[1].transpose().triangularView<Eigen::Upper>();
          for (Eigen::Index i = 0; i < m0; ++i)
            for (Eigen::Index j = 0; j < m1; ++j)
              out.values[((static_cast<std::size_t>(i) + 1) * n1 + static_cast<std::size_t>(j) + 1) * ud + k] =
                  y(i, j);
        }
        return;
      }
      // General N: apply each axis factor along its mode of the interior tensor.
      std::vector<std::size_t> dims(static_cast<std::size_t>(n));
      std::size_t total = 1;
      for (int a = 0; a < n; ++a) {
        dims[static_cast<std::size_t>(a)] = static_cast<std::size_t>(factor_[static_cast<std::size_t>(a)].rows());
        total *= dims[static_cast<std::size_t>(a)];
      }
      std::vector<double> t(total), tmp(total);
      for (std::size_t k = 0; k < ud; ++k) {
        for (auto& v : t) v = normal();
        std::size_t stride = 1;
        for (int a = n - 1; a >= 0; --a) {
          const std::size_t len = dims[static_cast<std::size_t>(a)];
          const auto& l = factor_[static_cast<std::size_t>(a)];
          const std::size_t block = stride * len;
          for (std::size_t base = 0; base < total; base += block) {
            for (std::size_t off = 0; off < stride; ++off) {
              for (std::size_t i = 0; i < len; ++i) {
                double acc = 0.0;
                for (std::size_t p = 0; p <= i; ++p)
                  acc += l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) * t[base + off + p * stride];
                tmp[base + off + i * stride] = acc;
              }
            }
          }
          t.swap(tmp);
          stride = block;
        }
        std::vector<std::size_t> inner(static_cast<std::size_t>(n), 0), node(static_cast<std::size_t>(n));
        for (std::size_t flat = 0; flat < total; ++flat) {
          for (std::size_t a = 0; a < node.size(); ++a) node[a] = inner[a] + 1;
          out.values[grid_.node_index(node) * ud + k] = t[flat];
          for (std::size_t a = inner.size(); a-- > 0;) {
            if (++inner[a] < dims[a]) break;
            inner[a] = 0;
          }
        }
      }
      return;
    }
  }
}

FieldPath simulate(const CovarianceModel& model, const Grid& grid, int d, std::uint64_t seed) {
  return GaussianSampler(model, grid, d).sample(seed);
}

// ---------------------------------------------------------------------------
// Covariance regularity check

namespace {

struct PairRow {
  double sep;
  double ratio32;  // |1 - sigma(s,t)/sigma^2(s)|
  double one_minus_rho2;
  double abs_rho;
};

}  // namespace

A1Report check_hypothesis_a1(const CovarianceModel& model, int n_params, double a, double b, double alpha,
                             double gamma, std::size_t n_pairs, std::uint64_t seed, const A1Options& opts) {
  model.validate();
  if (!(0.0 < a && a < b)) throw std::invalid_argument("check_hypothesis_a1: need 0 < a < b");
  if (!(alpha > 0.0 && alpha < 1.0) || !(gamma >= alpha))
    throw std::invalid_argument("check_hypothesis_a1: need alpha in (0,1), gamma >= alpha");
  if (n_params < 1 || n_pairs < 4 || opts.strata < 2) throw std::invalid_argument("check_hypothesis_a1: bad sizes");

  const double width = b - a;
  const double sep_min = opts.floor_fraction * width;
  const double sep_max = width;
  const auto edges = log_space(sep_min, sep_max, static_cast<std::size_t>(opts.strata) + 1);

  Engine eng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t np = static_cast<std::size_t>(n_params);

  A1Report rep;
  rep.alpha = alpha;
  rep.gamma = gamma;
  rep.delta = opts.delta_fraction * width;
  rep.c1 = std::numeric_limits<double>::infinity();
  rep.c2 = 0.0;

  std::vector<PairRow> rows;
  rows.reserve(n_pairs);
  std::vector<double> s(np), t(np), u(np);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const std::size_t stratum = p % static_cast<std::size_t>(opts.strata);
    const double lo = std::log(edges[stratum]), hi = std::log(edges[stratum + 1]);
    const double sep = std::exp(lo + (hi - lo) * unif(eng));
    // direction such that some s in the window has s + sep*u in the window
    while (true) {
      double norm = 0.0;
      for (auto& v : u) {
        v = gauss(eng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      bool fits = true;
      for (auto& v : u) {
        v /= norm;
        if (sep * std::abs(v) > width) fits = false;
      }
      if (fits) break;
    }
    for (std::size_t k = 0; k < np; ++k) {
      const double step = sep * u[k];
      const double lo_k = a - std::min(0.0, step), hi_k = b - std::max(0.0, step);
      s[k] = lo_k + (hi_k - lo_k) * unif(eng);
      t[k] = s[k] + step;
    }
    const double vs = covariance(model, s, s), vt = covariance(model, t, t), cst = covariance(model, s, t);
    rep.c1 = std::min({rep.c1, vs, vt});
    rep.c2 = std::max({rep.c2, vs, vt});
    const double rho = cst / std::sqrt(vs * vt);
    rows.push_back({sep, std::abs(1.0 - cst / vs), 1.0 - rho * rho, std::abs(rho)});
  }
  rep.n_pairs = rows.size();

  // near pairs: fitted constants and exponent
  const double near_low_edge = sep_min * 10.0;
  const double near_high_edge = rep.delta / 10.0;
  rep.c3 = 0.0;
  rep.c4 = std::numeric_limits<double>::infinity();
  rep.c5 = 0.0;
  double c3_low = 0.0, c3_high = 0.0, c5_low = 0.0, c5_high = 0.0;
  double c4_low = std::numeric_limits<double>::infinity(), c4_high = std::numeric_limits<double>::infinity();
  std::vector<double> lx, ly;
  double max_far_rho = 0.0;
  bool any_far = false;
  for (const auto& r : rows) {
    if (r.sep <= rep.delta) {
      const double r32 = r.ratio32 / std::pow(r.sep, gamma);
      const double r33 = r.one_minus_rho2 / std::pow(r.sep, 2.0 * alpha);
      rep.c3 = std::max(rep.c3, r32);
      rep.c4 = std::min(rep.c4, r33);
      rep.c5 = std::max(rep.c5, r33);
      if (r.sep <= near_low_edge) {
        c3_low = std::max(c3_low, r32);
        c4_low = std::min(c4_low, r33);
        c5_low = std::max(c5_low, r33);
      }
      if (r.sep > near_high_edge) {
        c3_high = std::max(c3_high, r32);
        c4_high = std::min(c4_high, r33);
        c5_high = std::max(c5_high, r33);
      }
      if (r.one_minus_rho2 > 0.0) {
        lx.push_back(std::log(r.sep));
        ly.push_back(std::log(r.one_minus_rho2));
      }
    } else {
      any_far = true;
      max_far_rho = std::max(max_far_rho, r.abs_rho);
    }
  }
  rep.epsilon = any_far ? 1.0 - max_far_rho : 1.0;

  if (lx.size() >= 2) {
    const auto fit = fit_line(lx, ly);
    rep.alpha_fit = 0.5 * fit.slope;
    rep.alpha_fit_stderr = 0.5 * fit.slope_stderr;
  }

  const double g = opts.growth_ceiling;
  rep.pass_31 = rep.c1 > 0.0 && std::isfinite(rep.c2) && rep.c1 <= rep.c2;
  rep.pass_32 = std::isfinite(rep.c3) && c3_low <= g * c3_high;
  rep.pass_33 = rep.c4 > 0.0 && std::isfinite(rep.c5) && c5_low <= g * c5_high && c4_low * g >= c4_high;
  rep.pass_34 = rep.epsilon > 0.0;
  rep.sample_description = std::to_string(rep.n_pairs) + " pairs in [" + std::to_string(a) + "," +
                           std::to_string(b) + "]^" + std::to_string(n_params) + ", " +
                           std::to_string(opts.strata) + " log strata of |t-s| from " + std::to_string(sep_min) +
                           " to " + std::to_string(sep_max) + ", delta=" + std::to_string(rep.delta);
  return rep;
}

}  // namespace sheetcap
