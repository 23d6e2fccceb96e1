#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sheetcap/compact_set.hpp"
#include "sheetcap/kernels.hpp"

namespace sheetcap {

/// Cell centers of a cubic lattice over the set's bounding box that fall in
/// the set.
struct Discretization {
  int dim = 1;
  std::vector<double> points;  ///< n * dim
  double cell_size = 0.0;

  std::size_t size() const { return points.size() / static_cast<std::size_t>(dim); }
  std::span<const double> point(std::size_t i) const {
    return {points.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

/// Cubic cells of side h = (largest bounding-box extent) / points_per_axis,
/// laid out symmetrically about the box center. Throws when no cell center
/// lies in the set.
Discretization discretize(const CompactSet& set, int points_per_axis);

struct SolverOptions {
  double tol = 1e-6;                              ///< stop when gap <= tol * energy
  std::size_t max_iter = 5'000'000;
  std::size_t cache_bytes = std::size_t{768} << 20;  ///< column cache for the matrix-free solver
  Execution exec = Execution::Parallel;
};

struct EnergySolution {
  double energy = 0.0;
  std::vector<double> weights;
  double duality_gap = 0.0;  ///< w'Kw - min_i (Kw)_i
  std::size_t iterations = 0;
  bool converged = false;
};

/// Minimizes w'Kw over the probability simplex with pairwise Frank-Wolfe
/// steps and exact line search. Deterministic for given inputs.
EnergySolution minimize_energy(const Eigen::MatrixXd& K, const SolverOptions& opts = {});

/// Kernel matrix over a point cloud with the analytic cell self-energy on
/// the diagonal. Entries are computed on demand.
class KernelMatrix {
 public:
  KernelMatrix(const RieszKernel& k, std::span<const double> points, double cell_size);

  std::size_t size() const { return n_; }
  double diagonal() const { return self_; }
  double entry(std::size_t i, std::size_t j) const;
  void column(std::size_t j, std::span<double> out, Execution exec) const;
  Eigen::MatrixXd dense(Execution exec) const;

 private:
  RieszKernel k_;
  std::vector<double> points_;
  std::size_t n_;
  int d_;
  double self_;
};

/// Matrix-free variant of minimize_energy for a KernelMatrix; a nonempty
/// `start` is used as the initial point (renormalized).
EnergySolution minimize_energy(const KernelMatrix& K, const SolverOptions& opts = {},
                               std::span<const double> start = {});

struct ResolutionRow {
  int resolution = 0;
  std::size_t atoms = 0;
  double cell_size = 0.0;
  double value = 0.0;
  double energy = 0.0;
  double duality_gap = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

struct CapacityResult {
  double value = 0.0;   ///< 1 / energy, 0 when the energy is infinite
  double energy = 0.0;  ///< +inf for polar sets
  DiscreteMeasure equilibrium;
  double duality_gap = 0.0;
  int resolution = 0;
  std::size_t iterations = 0;
  bool converged = true;
  std::vector<ResolutionRow> sequence;  ///< one row per requested resolution
};

/// Capacity of `set` from the cell-regularized discrete problem at each
/// resolution; the headline numbers are those of the finest one.
CapacityResult capacity_of(const CompactSet& set, const RieszKernel& k, const std::vector<int>& resolutions,
                           const SolverOptions& opts = {});

/// Capacity of the atomic problem on fixed points, each standing for a cell
/// of side `cell_size`.
CapacityResult capacity_of_points(const RieszKernel& k, std::span<const double> points, double cell_size,
                                  const SolverOptions& opts = {});

}  // namespace sheetcap
