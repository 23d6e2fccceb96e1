#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sheetcap/compact_set.hpp"
#include "sheetcap/montecarlo.hpp"
#include "sheetcap/stats.hpp"

namespace sheetcap {

/// Parameter window [a, b]^N.
struct Window {
  double a = 1.0;
  double b = 2.0;
};

/// True when some grid node in the window carries a value within `margin`
/// of the set.
bool hits(const FieldPath& path, const CompactSet& set, const Window& w, double margin);

/// Smallest distance from the window node values to the set.
double min_distance(const FieldPath& path, const std::vector<std::size_t>& nodes, const CompactSet& set);

/// How much to dilate target sets to offset the misses of grid sampling.
///  - Fixed:      m = value
///  - Modulus:    m = kappa * (largest window cell diameter)^(1/2 - eta)
///  - Continuity: m = kappa * scale * sqrt(h) * sum_k sqrt(prod_{l != k} c_l),
///    with h the largest window cell side and c the window center. Near a
///    crossing the sheet behaves like a sum of independent Brownian motions,
///    one per parameter, and the grid minimum of each overshoots the
///    continuous minimum by about 0.5826 sd sqrt(h).
struct MarginPolicy {
  enum class Kind { Fixed, Modulus, Continuity };
  Kind kind = Kind::Continuity;
  double value = 0.0;
  double kappa = 0.5826;
  double eta = 0.1;

  static MarginPolicy fixed(double m) { return {Kind::Fixed, m, 0.0, 0.0}; }
  static MarginPolicy modulus(double kappa = 3.0, double eta = 0.1) { return {Kind::Modulus, 0.0, kappa, eta}; }
  static MarginPolicy continuity(double kappa = 0.5826) { return {Kind::Continuity, 0.0, kappa, 0.0}; }

  /// `scale` is the noise amplitude of the source (1 for Gaussian fields).
  double margin(const Grid& grid, const Window& w, double scale = 1.0) const;
  std::string describe() const;
};

/// "fixed:m", "modulus[:kappa[,eta]]" or "continuity[:kappa]".
MarginPolicy parse_margin_policy(const std::string& text);

/// Noise amplitude used by the continuity margin: 1 for Gaussian fields, the
/// declared entry bound T for the SPDE.
double noise_scale(const PathSource& src);

struct HitProbEstimate {
  double p_hat = 0.0;
  std::size_t n_paths = 0;
  std::size_t n_hits = 0;
  double ci_low = 0.0, ci_high = 0.0;
  double margin = 0.0;
  std::string grid_description;
};

HitProbEstimate make_estimate(std::size_t n_hits, std::size_t n_paths, double margin, const Grid& grid);
std::string describe_grid(const Grid& grid);

HitProbEstimate estimate_hit_prob(const PathSource& src, const CompactSet& set, const Window& w, std::size_t n_paths,
                                  double margin, std::uint64_t seed, Execution exec = Execution::Parallel);

/// Hit estimates for several sets from the same paths.
std::vector<HitProbEstimate> estimate_hit_probs(const PathSource& src, const std::vector<CompactSet>& sets,
                                                const std::vector<double>& margins, const Window& w,
                                                std::size_t n_paths, std::uint64_t seed,
                                                Execution exec = Execution::Parallel);

struct ScalingReport {
  std::vector<double> radii;
  std::vector<HitProbEstimate> estimates;
  std::vector<bool> retained;  ///< 20/n <= p_hat <= 1 - 20/n
  double slope = 0.0;
  double slope_stderr = 0.0;
  double intercept = 0.0;
  bool sufficient = false;  ///< at least 3 retained radii
  double margin = 0.0;
  std::string margin_policy;
};

/// Hit probabilities of B(center, r) for each radius from one set of paths,
/// with the log-log slope fitted on the retained radii.
ScalingReport scaling_experiment(const PathSource& src, const std::vector<double>& center,
                                 const std::vector<double>& radii, const Window& w, std::size_t n_paths,
                                 const MarginPolicy& policy, std::uint64_t seed, Execution exec = Execution::Parallel);

}  // namespace sheetcap
