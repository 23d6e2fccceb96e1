#include "sheetcap/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sheetcap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct DenseColumns {
  const Eigen::MatrixXd& K;
  std::size_t size() const { return static_cast<std::size_t>(K.rows()); }
  double diag(std::size_t i) const { return K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)); }
  const double* col(std::size_t j, int) { return K.data() + j * size(); }
};

class CachedColumns {
 public:
  CachedColumns(const KernelMatrix& K, std::size_t cache_bytes, Execution exec)
      : K_(K), exec_(exec), slot_(K.size(), -1) {
    const std::size_t per = std::max<std::size_t>(1, K.size() * sizeof(double));
    capacity_ = cache_bytes / per;
    scratch_[0].resize(K.size());
    scratch_[1].resize(K.size());
  }
  std::size_t size() const { return K_.size(); }
  double diag(std::size_t) const { return K_.diagonal(); }
  const double* col(std::size_t j, int which) {
    if (slot_[j] >= 0) return store_[static_cast<std::size_t>(slot_[j])].data();
    if (store_.size() < capacity_) {
      store_.emplace_back(K_.size());
      K_.column(j, store_.back(), exec_);
      slot_[j] = static_cast<long>(store_.size() - 1);
      return store_.back().data();
    }
    auto& buf = scratch_[which];
    K_.column(j, buf, exec_);
    return buf.data();
  }

 private:
  const KernelMatrix& K_;
  Execution exec_;
  std::vector<long> slot_;
  std::vector<std::vector<double>> store_;
  std::size_t capacity_ = 0;
  std::vector<double> scratch_[2];
};

template <class Cols>
void recompute_gradient(Cols& cols, const std::vector<double>& w, std::vector<double>& g) {
  std::fill(g.begin(), g.end(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double* c = cols.col(i, 0);
    for (std::size_t r = 0; r < g.size(); ++r) g[r] += w[i] * c[r];
  }
}

template <class Cols>
EnergySolution pairwise_frank_wolfe(Cols& cols, const SolverOptions& opts, std::vector<double> w) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("minimize_energy: tol must be > 0");
  const std::size_t n = cols.size();
  if (n == 0) throw std::invalid_argument("minimize_energy: empty problem");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(cols.diag(i))) throw std::invalid_argument("minimize_energy: non-finite diagonal");

  if (w.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (cols.diag(i) < cols.diag(best)) best = i;
    w.assign(n, 0.0);
    w[best] = 1.0;
  } else {
    double total = 0.0;
    for (double v : w) {
      if (!(v >= 0.0)) throw std::invalid_argument("minimize_energy: negative start weight");
      total += v;
    }
    if (!(total > 0.0)) throw std::invalid_argument("minimize_energy: empty start");
    for (double& v : w) v /= total;
  }

  std::vector<double> g(n);
  recompute_gradient(cols, w, g);

  EnergySolution sol;
  int refreshes = 0;
  for (std::size_t it = 0;; ++it) {
    std::size_t j = 0, k = n;
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (g[i] < g[j]) j = i;
      if (w[i] > 0.0) {
        energy += w[i] * g[i];
        if (k == n || g[i] > g[k]) k = i;
      }
    }
    const double gap = energy - g[j];
    sol.energy = energy;
    sol.duality_gap = std::max(gap, 0.0);
    sol.iterations = it;
    if (gap <= opts.tol * energy || k == j) {
      // confirm against a freshly accumulated gradient before accepting
      if (refreshes++ < 3) {
        recompute_gradient(cols, w, g);
        energy = 0.0;
        j = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (g[i] < g[j]) j = i;
          energy += w[i] * g[i];
        }
        sol.energy = energy;
        sol.duality_gap = std::max(energy - g[j], 0.0);
        if (energy - g[j] <= opts.tol * energy) {
          sol.converged = true;
          break;
        }
        continue;
      }
      sol.converged = gap <= opts.tol * energy;
      break;
    }
    if (it >= opts.max_iter) break;

    const double* cj = cols.col(j, 0);
    const double* ck = cols.col(k, 1);
    const double curvature = cols.diag(j) + cols.diag(k) - 2.0 * cj[k];
    double gamma = curvature > 0.0 ? (g[k] - g[j]) / curvature : w[k];
    if (gamma >= w[k]) {
      gamma = w[k];
      w[k] = 0.0;
    } else {
      w[k] -= gamma;
    }
    w[j] += gamma;
    for (std::size_t i = 0; i < n; ++i) g[i] += gamma * (cj[i] - ck[i]);
  }
  sol.weights = std::move(w);
  return sol;
}

}  // namespace

Discretization discretize(const CompactSet& set, int points_per_axis) {
  if (points_per_axis < 2) throw std::invalid_argument("discretize: points_per_axis must be >= 2");
  std::vector<double> lo, hi;
  set.bounding_box(lo, hi);
  const std::size_t d = lo.size();
  double extent = 0.0;
  for (std::size_t i = 0; i < d; ++i) extent = std::max(extent, hi[i] - lo[i]);
  if (!(extent > 0.0)) throw std::invalid_argument("discretize: set is a single point; nothing to discretize");
  const double h = extent / points_per_axis;

  std::vector<std::size_t> count(d);
  std::vector<double> start(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double cells = std::ceil((hi[i] - lo[i]) / h - 1e-9);
    count[i] = std::max<std::size_t>(1, static_cast<std::size_t>(cells));
    start[i] = 0.5 * (lo[i] + hi[i]) - 0.5 * h * static_cast<double>(count[i] - 1);
  }

  Discretization out;
  out.dim = static_cast<int>(d);
  out.cell_size = h;
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> x(d);
  while (true) {
    for (std::size_t i = 0; i < d; ++i) x[i] = start[i] + h * static_cast<double>(idx[i]);
    if (set.contains(x)) out.points.insert(out.points.end(), x.begin(), x.end());
    std::size_t k = d;
    while (k-- > 0) {
      if (++idx[k] < count[k]) break;
      idx[k] = 0;
    }
    if (k == static_cast<std::size_t>(-1)) break;
  }
  if (out.points.empty())
    throw std::invalid_argument("discretize: no cell center falls in the set at resolution " +
                                std::to_string(points_per_axis) + "; refine the resolution");
  return out;
}

EnergySolution minimize_energy(const Eigen::MatrixXd& K, const SolverOptions& opts) {
  if (K.rows() != K.cols() || K.rows() == 0) throw std::invalid_argument("minimize_energy: K must be square");
  if (!K.allFinite()) throw std::invalid_argument("minimize_energy: K has non-finite entries");
  if (!K.isApprox(K.transpose(), 1e-12)) throw std::invalid_argument("minimize_energy: K must be symmetric");
  DenseColumns cols{K};
  return pairwise_frank_wolfe(cols, opts, {});
}

KernelMatrix::KernelMatrix(const RieszKernel& k, std::span<const double> points, double cell_size)
    : k_(k), points_(points.begin(), points.end()), d_(k.dimension()) {
  if (points.size() % static_cast<std::size_t>(d_) != 0) throw std::invalid_argument("kernel matrix: ragged points");
  n_ = points.size() / static_cast<std::size_t>(d_);
  self_ = k.self_energy(cell_size);
}

double KernelMatrix::entry(std::size_t i, std::size_t j) const {
  if (i == j) return self_;
  const auto d = static_cast<std::size_t>(d_);
  return k_.at_distance(distance({points_.data() + i * d, d}, {points_.data() + j * d, d}));
}

void KernelMatrix::column(std::size_t j, std::span<double> out, Execution exec) const {
  const auto d = static_cast<std::size_t>(d_);
  const double* pj = points_.data() + j * d;
  const bool newtonian = k_.kind() == RieszKernel::Kind::Power && k_.beta() == 1.0;
  auto fill = [&](std::size_t i) {
    const double* pi = points_.data() + i * d;
    double r2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double t = pi[c] - pj[c];
      r2 += t * t;
    }
    out[i] = newtonian ? 1.0 / std::sqrt(r2) : k_.at_distance(std::sqrt(r2));
  };
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(static) if (n_ > 4096)
    for (std::size_t i = 0; i < n_; ++i) fill(i);
  } else {
    for (std::size_t i = 0; i < n_; ++i) fill(i);
  }
  out[j] = self_;
}

Eigen::MatrixXd KernelMatrix::dense(Execution exec) const {
  Eigen::MatrixXd K(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  auto fill = [&](std::size_t j) {
    std::span<double> col(K.data() + j * n_, n_);
    column(j, col, Execution::Serial);
  };
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (std::size_t j = 0; j < n_; ++j) fill(j);
  } else {
    for (std::size_t j = 0; j < n_; ++j) fill(j);
  }
  return K;
}

EnergySolution minimize_energy(const KernelMatrix& K, const SolverOptions& opts, std::span<const double> start) {
  if (!std::isfinite(K.diagonal())) throw std::invalid_argument("minimize_energy: non-finite self-energy");
  if (!start.empty() && start.size() != K.size()) throw std::invalid_argument("minimize_energy: start has wrong size");
  CachedColumns cols(K, opts.cache_bytes, opts.exec);
  return pairwise_frank_wolfe(cols, opts, std::vector<double>(start.begin(), start.end()));
}

namespace {

CapacityResult solve_points(const RieszKernel& k, std::vector<double> points, double cell_size,
                            const SolverOptions& opts) {
  const auto d = static_cast<std::size_t>(k.dimension());
  if (points.empty() || points.size() % d != 0) throw std::invalid_argument("capacity: bad point cloud");
  if (k.kind() == RieszKernel::Kind::Log) {
    for (std::size_t i = 0; i < points.size(); i += d) {
      double r2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) r2 += points[i + c] * points[i + c];
      if (!(std::sqrt(r2) < k.log_scale()))
        throw std::invalid_argument("capacity: log kernel needs the set inside the ball of radius M");
    }
  }
  KernelMatrix K(k, points, cell_size);
  const EnergySolution sol = minimize_energy(K, opts);

  CapacityResult out;
  out.energy = sol.energy;
  out.value = sol.energy > 0.0 && std::isfinite(sol.energy) ? 1.0 / sol.energy : 0.0;
  out.duality_gap = sol.duality_gap;
  out.iterations = sol.iterations;
  out.converged = sol.converged;
  out.equilibrium.dim = k.dimension();
  out.equilibrium.cell_size = cell_size;
  out.equilibrium.support = std::move(points);
  out.equilibrium.weights = sol.weights;
  return out;
}

}  // namespace

CapacityResult capacity_of_points(const RieszKernel& k, std::span<const double> points, double cell_size,
                                  const SolverOptions& opts) {
  return solve_points(k, std::vector<double>(points.begin(), points.end()), cell_size, opts);
}

CapacityResult capacity_of(const CompactSet& set, const RieszKernel& k, const std::vector<int>& resolutions,
                           const SolverOptions& opts) {
  if (set.dim() != k.dimension()) throw std::invalid_argument("capacity: set and kernel dimensions differ");
  if (resolutions.empty()) throw std::invalid_argument("capacity: no resolutions given");
  for (std::size_t i = 1; i < resolutions.size(); ++i)
    if (resolutions[i] <= resolutions[i - 1]) throw std::invalid_argument("capacity: resolutions must increase");

  CapacityResult out;
  if (set.is_finite() && k.kind() != RieszKernel::Kind::Constant) {
    // finite sets are polar for every kernel that blows up at 0
    out.value = 0.0;
    out.energy = kInf;
    out.resolution = resolutions.back();
    for (int r : resolutions) out.sequence.push_back({r, 0, 0.0, 0.0, kInf, 0.0, 0, true});
    return out;
  }
  for (int r : resolutions) {
    Discretization disc = discretize(set, r);
    CapacityResult step;
    if (k.kind() == RieszKernel::Kind::Constant) {
      step.value = 1.0;
      step.energy = 1.0;
      step.equilibrium = uniform_measure(disc.dim, disc.points, disc.cell_size);
    } else {
      step = solve_points(k, std::move(disc.points), disc.cell_size, opts);
    }
    step.resolution = r;
    out.sequence.push_back({r, step.equilibrium.size(), step.equilibrium.cell_size, step.value, step.energy,
                            step.duality_gap, step.iterations, step.converged});
    auto seq = std::move(out.sequence);
    out = std::move(step);
    out.sequence = std::move(seq);
  }
  return out;
}

}  // namespace sheetcap
