#include "sheetcap/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sheetcap {

Grid::Grid(std::vector<std::vector<double>> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw std::invalid_argument("grid: need at least one axis");
  node_count_ = 1;
  cell_count_ = 1;
  for (std::size_t k = 0; k < axes_.size(); ++k) {
    const auto& ax = axes_[k];
    if (ax.size() < 2) throw std::invalid_argument("grid: axis " + std::to_string(k) + " needs two nodes");
    if (ax.front() != 0.0) throw std::invalid_argument("grid: axis " + std::to_string(k) + " must start at 0");
    for (std::size_t i = 1; i < ax.size(); ++i) {
      if (!(ax[i] > ax[i - 1]) || !std::isfinite(ax[i]))
        throw std::invalid_argument("grid: axis " + std::to_string(k) + " not strictly increasing");
    }
    node_count_ *= ax.size();
    cell_count_ *= ax.size() - 1;
  }
}

Grid Grid::uniform(int n_params, double b_max, int cells) {
  if (n_params < 1 || cells < 1 || !(b_max > 0.0)) throw std::invalid_argument("grid: bad uniform spec");
  std::vector<double> ax(static_cast<std::size_t>(cells) + 1);
  for (int i = 0; i <= cells; ++i) ax[static_cast<std::size_t>(i)] = b_max * i / cells;
  ax.back() = b_max;
  return Grid(std::vector<std::vector<double>>(static_cast<std::size_t>(n_params), ax));
}

Grid Grid::windowed(int n_params, double a, double b, int lead_cells, int window_cells) {
  if (n_params < 1 || lead_cells < 1 || window_cells < 1 || !(a > 0.0) || !(b > a))
    throw std::invalid_argument("grid: bad windowed spec");
  std::vector<double> ax;
  ax.reserve(static_cast<std::size_t>(lead_cells + window_cells) + 1);
  for (int i = 0; i < lead_cells; ++i) ax.push_back(a * i / lead_cells);
  for (int i = 0; i < window_cells; ++i) ax.push_back(a + (b - a) * i / window_cells);
  ax.push_back(b);
  return Grid(std::vector<std::vector<double>>(static_cast<std::size_t>(n_params), ax));
}

std::size_t Grid::node_index(std::span<const std::size_t> multi) const {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < axes_.size(); ++k) flat = flat * axes_[k].size() + multi[k];
  return flat;
}

std::vector<std::size_t> Grid::node_multi(std::size_t flat) const {
  std::vector<std::size_t> multi(axes_.size());
  for (std::size_t k = axes_.size(); k-- > 0;) {
    multi[k] = flat % axes_[k].size();
    flat /= axes_[k].size();
  }
  return multi;
}

std::vector<double> Grid::node_point(std::size_t flat) const {
  auto multi = node_multi(flat);
  std::vector<double> p(axes_.size());
  for (std::size_t k = 0; k < axes_.size(); ++k) p[k] = axes_[k][multi[k]];
  return p;
}

double Grid::cell_volume(std::span<const std::size_t> multi) const {
  double v = 1.0;
  for (std::size_t k = 0; k < axes_.size(); ++k) v *= axes_[k][multi[k] + 1] - axes_[k][multi[k]];
  return v;
}

long Grid::find_node(int k, double value) const {
  const auto& ax = axis(k);
  const double tol = 1e-12 * std::max(1.0, std::abs(value));
  for (std::size_t i = 0; i < ax.size(); ++i) {
    if (std::abs(ax[i] - value) <= tol) return static_cast<long>(i);
  }
  return -1;
}

double Grid::max_cell_diameter(double a, double b) const {
  double diam2 = 0.0;
  for (const auto& ax : axes_) {
    double widest = 0.0;
    for (std::size_t i = 0; i + 1 < ax.size(); ++i) {
      if (ax[i] >= a - 1e-12 && ax[i] < b - 1e-12) widest = std::max(widest, ax[i + 1] - ax[i]);
    }
    diam2 += widest * widest;
  }
  return std::sqrt(diam2);
}

namespace {

struct AxisRange {
  std::size_t lo, hi;  // inclusive
};

std::vector<AxisRange> window_ranges(const Grid& grid, double a, double b) {
  if (!(a < b)) throw std::invalid_argument("window: need a < b");
  std::vector<AxisRange> ranges;
  for (int k = 0; k < grid.params(); ++k) {
    const long lo = grid.find_node(k, a);
    const long hi = grid.find_node(k, b);
    if (lo < 0 || hi < 0)
      throw std::invalid_argument("window outside grid: [" + std::to_string(a) + ", " + std::to_string(b) +
                                  "] endpoints are not nodes of axis " + std::to_string(k));
    ranges.push_back({static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)});
  }
  return ranges;
}

template <class Visit>
void for_each_window_node(const Grid& grid, const std::vector<AxisRange>& ranges, Visit visit) {
  const std::size_t n = ranges.size();
  std::vector<std::size_t> multi(n);
  for (std::size_t k = 0; k < n; ++k) multi[k] = ranges[k].lo;
  while (true) {
    visit(multi);
    std::size_t k = n;
    while (k-- > 0) {
      if (++multi[k] <= ranges[k].hi) break;
      multi[k] = ranges[k].lo;
      if (k == 0) return;
    }
    (void)grid;
  }
}

}  // namespace

std::vector<std::size_t> window_nodes(const Grid& grid, double a, double b) {
  const auto ranges = window_ranges(grid, a, b);
  std::vector<std::size_t> out;
  for_each_window_node(grid, ranges, [&](const std::vector<std::size_t>& m) { out.push_back(grid.node_index(m)); });
  return out;
}

std::vector<double> window_weights(const Grid& grid, double a, double b) {
  const auto ranges = window_ranges(grid, a, b);
  // per-axis trapezoid weights
  std::vector<std::vector<double>> axis_w(ranges.size());
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    const auto& ax = grid.axis(static_cast<int>(k));
    auto& w = axis_w[k];
    w.assign(ranges[k].hi - ranges[k].lo + 1, 0.0);
    for (std::size_t i = ranges[k].lo; i < ranges[k].hi; ++i) {
      const double half = 0.5 * (ax[i + 1] - ax[i]);
      w[i - ranges[k].lo] += half;
      w[i + 1 - ranges[k].lo] += half;
    }
  }
  std::vector<double> out;
  for_each_window_node(grid, ranges, [&](const std::vector<std::size_t>& m) {
    double w = 1.0;
    for (std::size_t k = 0; k < m.size(); ++k) w *= axis_w[k][m[k] - ranges[k].lo];
    out.push_back(w);
  });
  return out;
}

}  // namespace sheetcap
