#include "sheetcap/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

namespace sheetcap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Rule {
  std::vector<double> nodes, weights;  // on [-1/2, 1/2], weights sum to 1
};

template <unsigned N>
Rule legendre_rule() {
  using G = boost::math::quadrature::gauss<double, N>;
  Rule r;
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.nodes.push_back(0.5 * x[i]);
    r.weights.push_back(0.5 * w[i]);
    if (x[i] != 0.0) {
      r.nodes.push_back(-0.5 * x[i]);
      r.weights.push_back(0.5 * w[i]);
    }
  }
  return r;
}

// Tensor Gauss-Legendre integral over [-1/2, 1/2]^m of f(|y|^2).
template <class F>
double cube_integral(int m, F f) {
  if (m == 0) return f(0.0);
  const Rule rule = m <= 2   ? legendre_rule<30>()
                    : m == 3 ? legendre_rule<20>()
                    : m == 4 ? legendre_rule<12>()
                    : m == 5 ? legendre_rule<10>()
                             : legendre_rule<7>();
  const std::size_t q = rule.nodes.size();
  std::vector<std::size_t> idx(static_cast<std::size_t>(m), 0);
  double total = 0.0;
  while (true) {
    double r2 = 0.0, w = 1.0;
    for (std::size_t i : idx) {
      r2 += rule.nodes[i] * rule.nodes[i];
      w *= rule.weights[i];
    }
    total += w * f(r2);
    std::size_t k = 0;
    while (k < idx.size() && ++idx[k] == q) idx[k++] = 0;
    if (k == idx.size()) break;
  }
  return total;
}

}  // namespace

RieszKernel::RieszKernel(double beta, int dimension, double log_scale)
    : beta_(beta), dim_(dimension), log_scale_(log_scale) {
  if (dimension < 1) throw std::invalid_argument("kernel: dimension must be >= 1");
  if (!std::isfinite(beta) || beta >= dimension) throw std::invalid_argument("kernel: need beta < dimension");
  if (!(log_scale > 0.0) || !std::isfinite(log_scale)) throw std::invalid_argument("kernel: log scale must be > 0");
  kind_ = beta < 0.0 ? Kind::Constant : beta == 0.0 ? Kind::Log : Kind::Power;

  // Split the unit cube into 2d pyramids with apex at the origin and base on
  // a face; the radial factor integrates in closed form, leaving a smooth
  // integral over the (d-1)-dimensional face.
  const int m = dimension - 1;
  if (kind_ == Kind::Power) {
    const double face = cube_integral(m, [b = beta](double r2) { return std::pow(0.25 + r2, -0.5 * b); });
    unit_cube_mean_ = dimension / (dimension - beta) * face;
  } else if (kind_ == Kind::Log) {
    const double face = cube_integral(m, [](double r2) { return 0.5 * std::log(0.25 + r2); });
    unit_cube_mean_ = -1.0 / dimension + face;
  }
}

double RieszKernel::at_distance(double r) const {
  switch (kind_) {
    case Kind::Constant:
      return 1.0;
    case Kind::Log:
      return r > 0.0 ? std::log(3.0 * log_scale_ / r) : kInf;
    case Kind::Power:
      return r > 0.0 ? std::pow(r, -beta_) : kInf;
  }
  return 0.0;
}

double RieszKernel::operator()(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("kernel: point has wrong dimension");
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return at_distance(std::sqrt(r2));
}

double RieszKernel::self_energy(double h) const {
  if (!(h > 0.0)) throw std::invalid_argument("self_energy: cell size must be > 0");
  switch (kind_) {
    case Kind::Constant:
      return 1.0;
    case Kind::Log:
      return std::log(3.0 * log_scale_ / h) - unit_cube_mean_;
    case Kind::Power:
      return std::pow(h, -beta_) * unit_cube_mean_;
  }
  return 0.0;
}

void DiscreteMeasure::validate() const {
  if (dim < 1) throw std::invalid_argument("measure: dim must be >= 1");
  if (support.size() != weights.size() * static_cast<std::size_t>(dim))
    throw std::invalid_argument("measure: support and weights disagree in length");
  if (weights.empty()) throw std::invalid_argument("measure: empty support");
  if (!(cell_size > 0.0)) throw std::invalid_argument("measure: cell size must be > 0");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("measure: weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("measure: weights must sum to 1");
  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), 0);
  auto less = [this](std::size_t a, std::size_t b) {
    const auto pa = point(a), pb = point(b);
    return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
  };
  std::sort(order.begin(), order.end(), less);
  for (std::size_t i = 1; i < order.size(); ++i) {
    const auto pa = point(order[i - 1]), pb = point(order[i]);
    if (std::equal(pa.begin(), pa.end(), pb.begin())) throw std::invalid_argument("measure: repeated support point");
  }
}

DiscreteMeasure uniform_measure(int dim, std::vector<double> points, double cell_size) {
  DiscreteMeasure mu;
  mu.dim = dim;
  const std::size_t n = points.size() / static_cast<std::size_t>(dim);
  mu.support = std::move(points);
  mu.weights.assign(n, n ? 1.0 / static_cast<double>(n) : 0.0);
  mu.cell_size = cell_size;
  return mu;
}

DiagonalMode parse_diagonal_mode(const std::string& name) {
  if (name == "include") return DiagonalMode::Include;
  if (name == "exclude") return DiagonalMode::Exclude;
  if (name == "cell_regularized" || name == "cell") return DiagonalMode::CellRegularized;
  throw std::invalid_argument("unknown diagonal mode '" + name + "'");
}

double distance(std::span<const double> x, std::span<const double> y) {
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x[i] - y[i];
    r2 += t * t;
  }
  return std::sqrt(r2);
}

double eval_kernel(const RieszKernel& k, std::span<const double> x) { return k(x); }

double potential(const RieszKernel& k, const DiscreteMeasure& mu, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(mu.dim) || mu.dim != k.dimension())
    throw std::invalid_argument("potential: dimension mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu.weights[i] == 0.0) continue;
    total += mu.weights[i] * k.at_distance(distance(x, mu.point(i)));
  }
  if (std::isnan(total)) throw std::domain_error("potential: NaN");
  return total;
}

double energy(const RieszKernel& k, const DiscreteMeasure& mu, DiagonalMode mode, Execution exec) {
  if (mu.dim != k.dimension()) throw std::invalid_argument("energy: dimension mismatch");
  const std::size_t n = mu.size();
  const double self = mode == DiagonalMode::Include     ? k.at_distance(0.0)
                      : mode == DiagonalMode::Exclude   ? 0.0
                                                        : k.self_energy(mu.cell_size);
  std::vector<double> rows(n, 0.0);
  auto row = [&](std::size_t i) {
    const double wi = mu.weights[i];
    if (wi == 0.0) return;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || mu.weights[j] == 0.0) continue;
      acc += mu.weights[j] * k.at_distance(distance(mu.point(i), mu.point(j)));
    }
    rows[i] = wi * (acc + wi * self);
  };
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t i = 0; i < n; ++i) row(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) row(i);
  }
  double total = 0.0;
  for (double r : rows) total += r;
  if (std::isnan(total)) throw std::domain_error("energy: NaN");
  return total;
}

}  // namespace sheetcap
