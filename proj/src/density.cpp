#include "sheetcap/density.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace sheetcap {

std::string BandwidthPolicy::describe() const {
  return fmt::format("{}:{}", rule == Rule::Scott ? "scott" : "silverman", factor);
}

BandwidthPolicy parse_bandwidth_policy(const std::string& text) {
  BandwidthPolicy p;
  const auto colon = text.find(':');
  const std::string rule = text.substr(0, colon);
  if (rule == "scott")
    p.rule = BandwidthPolicy::Rule::Scott;
  else if (rule == "silverman")
    p.rule = BandwidthPolicy::Rule::Silverman;
  else
    throw std::invalid_argument("bandwidth policy: unknown rule '" + rule + "'");
  if (colon != std::string::npos) {
    try {
      p.factor = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("bandwidth policy: bad factor in '" + text + "'");
    }
    if (!(p.factor > 0.0)) throw std::invalid_argument("bandwidth policy: factor must be > 0");
  }
  return p;
}

namespace {

std::vector<double> coordinate_sds(std::span<const double> samples, int d) {
  const auto ud = static_cast<std::size_t>(d);
  const std::size_t n = samples.size() / ud;
  std::vector<double> mean(ud, 0.0), ss(ud, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < ud; ++k) mean[k] += samples[i * ud + k];
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < ud; ++k) {
      const double t = samples[i * ud + k] - mean[k];
      ss[k] += t * t;
    }
  for (auto& s : ss) s = std::sqrt(s / static_cast<double>(n - 1));
  return ss;
}

}  // namespace

double mean_coordinate_sd(std::span<const double> samples, int d) {
  if (samples.size() < 2 * static_cast<std::size_t>(d)) throw std::invalid_argument("sd: need >= 2 samples");
  double total = 0.0;
  for (double s : coordinate_sds(samples, d)) total += s;
  return total / d;
}

std::vector<double> bandwidths(std::span<const double> samples, int d, const BandwidthPolicy& policy) {
  const auto ud = static_cast<std::size_t>(d);
  const std::size_t n = samples.size() / ud;
  if (n < policy.min_samples)
    throw std::invalid_argument(fmt::format("kde: {} samples is below the policy minimum {}", n, policy.min_samples));
  const double base = std::pow(static_cast<double>(n), -1.0 / (d + 4));
  const double rule =
      policy.rule == BandwidthPolicy::Rule::Scott ? 1.0 : std::pow(4.0 / (d + 2.0), 1.0 / (d + 4.0));
  auto h = coordinate_sds(samples, d);
  for (auto& v : h) {
    v *= base * rule * policy.factor;
    if (!(v > 0.0)) throw std::invalid_argument("kde: degenerate sample (zero spread)");
  }
  return h;
}

std::vector<double> kde(std::span<const double> samples, int d, std::span<const double> bandwidth,
                        std::span<const double> points, Execution exec) {
  const auto ud = static_cast<std::size_t>(d);
  if (bandwidth.size() != ud) throw std::invalid_argument("kde: one bandwidth per coordinate");
  const std::size_t n = samples.size() / ud;
  const std::size_t m = points.size() / ud;
  if (n == 0) throw std::invalid_argument("kde: no samples");
  std::vector<double> inv(ud);
  double norm = static_cast<double>(n);
  for (std::size_t k = 0; k < ud; ++k) {
    inv[k] = 1.0 / bandwidth[k];
    norm *= bandwidth[k] * std::sqrt(2.0 * std::numbers::pi);
  }
  // contributions beyond 9 bandwidths (exp(-40.5) ~ 2.6e-18) are dropped
  constexpr double cutoff = 81.0;
  std::vector<double> out(m);
  auto eval = [&](std::size_t p) {
    const double* x = points.data() + p * ud;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* y = samples.data() + i * ud;
      double q = 0.0;
      for (std::size_t k = 0; k < ud; ++k) {
        const double z = (x[k] - y[k]) * inv[k];
        q += z * z;
      }
      if (q < cutoff) acc += std::exp(-0.5 * q);
    }
    out[p] = acc / norm;
  };
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t p = 0; p < m; ++p) eval(p);
  } else {
    for (std::size_t p = 0; p < m; ++p) eval(p);
  }
  return out;
}

std::vector<double> radial_evaluation_set(int d, double reach) {
  if (!(reach > 0.0)) throw std::invalid_argument("evaluation set: reach must be > 0");
  const auto ud = static_cast<std::size_t>(d);
  std::vector<std::vector<double>> dirs;
  for (std::size_t k = 0; k < ud; ++k)
    for (double sign : {1.0, -1.0}) {
      std::vector<double> v(ud, 0.0);
      v[k] = sign;
      dirs.push_back(v);
    }
  if (d > 1)
    for (double sign : {1.0, -1.0}) dirs.emplace_back(ud, sign / std::sqrt(static_cast<double>(d)));
  std::vector<double> out(ud, 0.0);
  for (int step = 1; step <= 6; ++step) {
    const double r = reach * step / 6.0;
    for (const auto& v : dirs)
      for (double c : v) out.push_back(r * c);
  }
  return out;
}

double normal_density(std::span<const double> x, double var) {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return std::exp(-0.5 * r2 / var) / std::pow(2.0 * std::numbers::pi * var, 0.5 * static_cast<double>(x.size()));
}

}  // namespace sheetcap
