#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sheetcap {

/// Serial runs the reference loops; Parallel runs the OpenMP loops. Both
/// reduce in the same order and return identical results.
enum class Execution { Serial, Parallel };

/// Newtonian beta kernel on R^d:
///   |x|^-beta        for 0 < beta < d
///   ln(3M / |x|)     for beta = 0
///   1                for beta < 0
class RieszKernel {
 public:
  enum class Kind { Constant, Log, Power };

  RieszKernel(double beta, int dimension, double log_scale = 1.0);

  double beta() const { return beta_; }
  int dimension() const { return dim_; }
  double log_scale() const { return log_scale_; }
  Kind kind() const { return kind_; }

  /// k as a function of |x|. Returns +inf at r = 0 for beta >= 0.
  double at_distance(double r) const;
  double operator()(std::span<const double> x) const;

  /// Mean of k over the centered cube of side h in R^d.
  double self_energy(double h) const;

 private:
  double beta_;
  int dim_;
  double log_scale_;
  Kind kind_;
  double unit_cube_mean_ = 0.0;  // power: mean of |u|^-beta; log: mean of ln|u| (u uniform in the unit cube)
};

/// Probability weights on distinct points of R^d. Each atom stands for a
/// cell of linear size `cell_size`.
struct DiscreteMeasure {
  int dim = 1;
  std::vector<double> support;  ///< n * dim coordinates
  std::vector<double> weights;
  double cell_size = 1.0;

  std::size_t size() const { return weights.size(); }
  std::span<const double> point(std::size_t i) const {
    return {support.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  /// Throws unless weights are nonnegative, sum to 1 within 1e-12, and the
  /// support points are pairwise distinct.
  void validate() const;
};

/// Measure with equal weights on the given points.
DiscreteMeasure uniform_measure(int dim, std::vector<double> points, double cell_size);

enum class DiagonalMode { Include, Exclude, CellRegularized };

DiagonalMode parse_diagonal_mode(const std::string& name);

double eval_kernel(const RieszKernel& k, std::span<const double> x);

/// sum_i w_i k(x - p_i).
double potential(const RieszKernel& k, const DiscreteMeasure& mu, std::span<const double> x);

/// Double sum of k(p_i - p_j) w_i w_j with the diagonal handled per `mode`.
double energy(const RieszKernel& k, const DiscreteMeasure& mu, DiagonalMode mode,
              Execution exec = Execution::Parallel);

double distance(std::span<const double> x, std::span<const double> y);

}  // namespace sheetcap
