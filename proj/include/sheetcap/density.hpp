#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sheetcap/kernels.hpp"

namespace sheetcap {

/// Rule-of-thumb bandwidth per coordinate, times `factor`:
///   Scott:     sd_k * n^(-1/(d+4))
///   Silverman: sd_k * (4/(d+2))^(1/(d+4)) * n^(-1/(d+4))
struct BandwidthPolicy {
  enum class Rule { Scott, Silverman };
  Rule rule = Rule::Scott;
  double factor = 1.0;
  std::size_t min_samples = 100;

  std::string describe() const;
};

BandwidthPolicy parse_bandwidth_policy(const std::string& text);

/// Bandwidths for samples laid out n * d.
std::vector<double> bandwidths(std::span<const double> samples, int d, const BandwidthPolicy& policy);

/// Product-Gaussian kernel density estimate at each evaluation point.
std::vector<double> kde(std::span<const double> samples, int d, std::span<const double> bandwidth,
                        std::span<const double> points, Execution exec = Execution::Parallel);

/// Per-coordinate sample standard deviations, averaged.
double mean_coordinate_sd(std::span<const double> samples, int d);

/// The origin plus points at radius fraction * reach, fraction in
/// {1/6, 2/6, ..., 1}, along +-e_k and +-(1,...,1)/sqrt(d).
std::vector<double> radial_evaluation_set(int d, double reach);

/// Density of N(0, var * I) in R^d.
double normal_density(std::span<const double> x, double var);

}  // namespace sheetcap
