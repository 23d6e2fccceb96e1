#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sheetcap/grid.hpp"

namespace sheetcap {

/// Coefficient data of the planar system
///
///     X_t = x0 + int_[0,t] sigma(X_s) dW_s + int_[0,t] b(X_s) ds.
///
/// sigma writes a row-major d x d matrix (entry [i*d + j] multiplies dW^j in
/// coordinate i). An empty `drift` means b == 0.
struct Coefficients {
  using Field = std::function<void(std::span<const double> x, std::span<double> out)>;

  int dim = 1;
  Field sigma;
  Field drift;
  std::vector<double> x0;
  double ellipticity_rho = 1.0;  ///< declared lower bound on |sigma(x) xi| for unit xi
  double uniform_bound_T = 1.0;  ///< declared bound on |sigma_ij|
  double drift_bound_N = 0.0;    ///< declared bound on |b_i|
  std::string description;

  bool drift_free() const { return !drift; }
  void validate() const;
};

/// sigma = rho * I, b = 0, x0 = 0.
Coefficients constant_diagonal(int d, double rho);

/// sigma(x) = rho * I + eps * S(x) with S_ij(x) = tanh(x_i - x_j + phase_ij),
/// b = 0, x0 = 0. eps defaults to rho / (2d), so the declared ellipticity is
/// rho / 2 and the declared entry bound is rho + eps.
Coefficients perturbed_identity(int d, double rho, double eps = -1.0);

/// Copy of `base` with b == c.
Coefficients with_constant_drift(Coefficients base, std::vector<double> c);

/// Copy of `base` with b removed.
Coefficients without_drift(Coefficients base);

struct CoefficientCheck {
  double min_ellipticity = 0.0;  ///< smallest |sigma(x) xi| seen
  double max_entry = 0.0;
  double max_drift = 0.0;
  bool ok = false;
};

/// Spot-checks the declared constants on n random states (|x_i| <= radius)
/// and unit directions.
CoefficientCheck spot_check(const Coefficients& c, std::size_t n, std::uint64_t seed, double radius = 5.0);

class SpdeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Explicit Euler-Goursat scheme on a planar grid, coefficients at the lower
/// left corner of each cell:
///
///     X(i+1,j+1) = X(i+1,j) + X(i,j+1) - X(i,j) + sigma(X(i,j)) dW(i,j) + b(X(i,j)) |cell|
///
/// The stochastic and drift integrals are accumulated separately and X is
/// assembled as (x0 + M) + A, which is the same recursion in exact arithmetic.
/// The returned path carries the driving increments.
FieldPath solve(const Coefficients& coeffs, const Grid& grid, const FieldPath& noise);
FieldPath solve(const Coefficients& coeffs, const Grid& grid, std::uint64_t seed);

/// Reusable buffers for repeated solves.
struct SpdeWorkspace {
  std::vector<double> martingale, drift_part, sigma, drift, state, step;
};

/// Core solver. `out.increments` must already hold the driving increments
/// for `grid`. Nodes with i <= frozen_i and j <= frozen_j (the frozen
/// rectangle) are taken from `out` and its workspace accumulators as they
/// stand, which is how continuations avoid recomputing the frozen past.
void solve_in_place(const Coefficients& coeffs, FieldPath& out, SpdeWorkspace& ws, std::size_t frozen_i = 0,
                    std::size_t frozen_j = 0);

/// Continuation from a frozen past: increments in cells inside [0, s] come
/// from `base_noise`, all others are drawn from `seed` in the canonical
/// order. `s_node` is the multi-index of s.
FieldPath continue_from(const Coefficients& coeffs, const Grid& grid, std::span<const std::size_t> s_node,
                        const FieldPath& base_noise, std::uint64_t seed);

/// Precomputed continuation: solves the frozen rectangle once and re-solves
/// only the L-shaped remainder for each fresh seed.
class Continuation {
 public:
  Continuation(const Coefficients& coeffs, const FieldPath& base_noise, std::span<const std::size_t> s_node);

  /// Writes the continuation for `seed` into `out`.
  void sample_into(std::uint64_t seed, FieldPath& out, SpdeWorkspace& ws) const;
  FieldPath sample(std::uint64_t seed) const;

  const FieldPath& base() const { return base_; }

 private:
  Coefficients coeffs_;
  FieldPath base_;
  SpdeWorkspace base_ws_;
  std::size_t si_, sj_;
};

enum class GirsanovDirection { L, J };

/// exp(-sum u.dW -/+ 1/2 sum |u|^2 |cell|) over cells inside [0, t], with
/// u = sigma^{-1}(X) b(X) at the lower-left corner; minus for L, plus for J.
double girsanov_weight(const Coefficients& coeffs, const FieldPath& path, std::span<const std::size_t> t_node,
                       GirsanovDirection direction);

}  // namespace sheetcap
