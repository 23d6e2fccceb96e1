#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sheetcap/capacity.hpp"
#include "sheetcap/density.hpp"
#include "sheetcap/hitting.hpp"
#include "sheetcap/stats.hpp"

namespace sheetcap {

/// Volume of the Euclidean ball of radius r in R^d.
double ball_volume(int d, double r);

// ---------------------------------------------------------------------------
// Occupation densities

struct OccupationEstimate {
  double value = 0.0;  ///< mean over paths of (time spent within h of x) / |B(x, h)|
  double stderr_ = 0.0;
  Interval ci;
  std::size_t n_paths = 0;
  double h = 0.0;
};

OccupationEstimate occupation_density(const PathSource& src, std::span<const double> x, double h, const Window& w,
                                      std::size_t n_paths, std::uint64_t seed, Execution exec = Execution::Parallel);

struct PairRow {
  std::vector<double> x, y;
  double separation = 0.0;
  double kernel_value = 0.0;
  double pair_occupation = 0.0;  ///< mean of J_x * J_y
  double stderr_ = 0.0;
  double ratio = 0.0;            ///< pair_occupation / k(x - y)
  std::size_t joint_hits = 0;    ///< paths that visit both neighbourhoods
  bool flagged = false;          ///< too few joint hits; excluded from the summary
};

struct PairOccupationReport {
  std::vector<PairRow> rows;
  double c2_hat = 0.0;     ///< largest unflagged ratio
  double stability = 0.0;  ///< largest / smallest unflagged ratio
  std::size_t usable = 0;
};

/// Integral over the window of the N(0, v(t) I) density at x, for a
/// centered field with i.i.d. coordinates of variance v(t). Tensor
/// Gauss-Legendre, 40 nodes per parameter.
double expected_occupation(const std::function<double(std::span<const double>)>& variance, std::span<const double> x,
                           const Window& w, int n_params);

PairOccupationReport pair_occupation_ratio(const PathSource& src,
                                           const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs,
                                           double h, const Window& w, std::size_t n_paths, const RieszKernel& k,
                                           std::uint64_t seed, std::size_t min_joint_hits = 10,
                                           Execution exec = Execution::Parallel);

// ---------------------------------------------------------------------------
// Gaussian-shape density bounds

using DensityFn = std::function<double(std::span<const double>)>;

/// KDE of a sample against the shapes c s^(-d/2) exp(-|x|^2 / (c s)).
struct DensityFitReport {
  std::string label;
  int d = 1;
  double shape_scale = 0.0;  ///< s: s1 s2 for marginals, |t - s| for increments
  double reach = 0.0;        ///< evaluation radius (3 sample sd)
  std::vector<double> points;  ///< evaluation points, d per point
  std::vector<double> density;  ///< full-sample KDE
  std::vector<double> budget;   ///< |f_A - f_B| / 2 from two half samples
  std::vector<double> reference;  ///< exact density when known, else empty
  std::vector<double> bandwidth;
  std::string bandwidth_policy;
  std::size_t n_samples = 0;
  double c_low = 0.0;  ///< largest c with shape <= density - budget everywhere
  double c_up = std::numeric_limits<double>::infinity();  ///< smallest c with shape >= density + budget
  bool pass_lower = false, pass_upper = false, pass = false;
  double sup_rel_error = std::numeric_limits<double>::quiet_NaN();  ///< vs reference

  std::size_t size() const { return density.size(); }
  double lower_envelope(std::size_t i) const;
  double upper_envelope(std::size_t i) const;
};

/// Shape value c s^(-d/2) exp(-|x|^2 / (c s)).
double gaussian_shape(double c, double s, int d, std::span<const double> x);

DensityFitReport fit_density_bounds(std::span<const double> samples, int d, double shape_scale,
                                    const BandwidthPolicy& policy, const DensityFn& reference = {},
                                    Execution exec = Execution::Parallel);

/// Density of X_s, s a node multi-index of the source grid.
DensityFitReport marginal_density_check(const PathSource& src, std::span<const std::size_t> s_node,
                                        std::size_t n_paths, const BandwidthPolicy& policy, std::uint64_t seed,
                                        const DensityFn& reference = {}, Execution exec = Execution::Parallel);

/// Density of X_t - X_s given the past on [0, s], one report per simulated
/// past. `reference` (if given) is the exact increment density.
std::vector<DensityFitReport> conditional_density_check(const Coefficients& coeffs, const Grid& grid,
                                                        std::span<const std::size_t> s_node,
                                                        std::span<const std::size_t> t_node, std::size_t n_past,
                                                        std::size_t n_cont, const BandwidthPolicy& policy,
                                                        std::uint64_t seed, const DensityFn& reference = {},
                                                        Execution exec = Execution::Parallel);

struct EnvelopeRate {
  std::vector<double> separations;  ///< |t - s|
  std::vector<double> envelopes;    ///< c_up |t - s|^(-d/2)
  double slope = 0.0, slope_stderr = 0.0;
  double expected = 0.0;  ///< -d/2
  double tolerance = 0.2;  ///< relative
  bool pass = false;
};

EnvelopeRate envelope_rate(const std::vector<double>& separations, const std::vector<double>& c_up, int d,
                           double tolerance = 0.2);

// ---------------------------------------------------------------------------
// Change of measure

struct GirsanovReport {
  Interval a_ci;
  double a = 0.0, a_stderr = 0.0;  ///< hit fraction of the drifted solution
  double b = 0.0, b_stderr = 0.0;  ///< mean of 1{hit} / J over drift-free paths
  double difference = 0.0;
  double combined_stderr = 0.0;  ///< sqrt(se_a^2 + se_b^2)
  double paired_stderr = 0.0;    ///< stderr of the per-path difference
  double z = 0.0;
  double l_mean = 0.0, l_stderr = 0.0;  ///< mean of L along the drifted solution
  bool pass_identity = false;  ///< |A - B| <= 3 combined stderr
  bool pass_l = false;         ///< |mean L - 1| <= 4 stderr
  std::size_t n_paths = 0;
  double margin = 0.0;
};

/// Paired paths: path i drives both the drifted and the drift-free solution.
/// The weights use all cells below the window's upper corner.
GirsanovReport girsanov_crosscheck(const Coefficients& coeffs_with_drift, const Grid& grid, const CompactSet& set,
                                   const Window& w, std::size_t n_paths, double margin, std::uint64_t seed,
                                   Execution exec = Execution::Parallel);

// ---------------------------------------------------------------------------
// Radial integral

struct PhiReport {
  double alpha = 0.0, beta = 0.0;
  int n = 0;
  std::vector<double> r, phi;
  std::vector<double> decade_slopes;  ///< least-squares coefficient of ln r per decade (beta = N)
  double variation = 0.0;             ///< (max - min) / max of phi over the last decade (beta > N)
  std::string regime;                 ///< "bounded", "log" or "growing"
  bool pass = false;
};

/// phi(r) = |S^{N-1}| int_0^r rho^(N-1-beta) exp(-rho^(-2 alpha)) drho.
double phi_value(double alpha, double beta, int n, double r);

PhiReport phi_check(double alpha, double beta, int n, const std::vector<double>& r_values, double r0 = 0.1);

// ---------------------------------------------------------------------------
// Capacity sandwich

struct SandwichRow {
  std::string id;
  double capacity = 0.0;
  double p_hat = 0.0, ci_low = 0.0, ci_high = 0.0;
  std::size_t n_paths = 0;
  double ratio = 0.0;  ///< p_hat / capacity (0 for polar rows)
  bool polar = false;  ///< capacity 0
  bool polarity_violation = false;
};

struct SandwichReport {
  std::vector<SandwichRow> rows;
  double band = 0.0;  ///< max ratio / min ratio over rows with positive capacity
  double k_fit = 0.0;  ///< max(max ratio, 1 / min ratio)
  double ceiling = 20.0;
  std::size_t violations = 0;
  bool pass = false;
};

SandwichReport sandwich_report(const std::vector<std::string>& ids, const std::vector<CapacityResult>& capacities,
                               const std::vector<HitProbEstimate>& hits, double ceiling = 20.0);

}  // namespace sheetcap
