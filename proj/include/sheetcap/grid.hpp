#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sheetcap {

/// Tensor-product partition of a rectangle [0, b_1] x ... x [0, b_N].
///
/// Every axis starts at 0 and is strictly increasing. Nodes and cells are
/// stored row-major with axis 0 slowest. Cell (i_1..i_N) is the box between
/// node (i_1..i_N) and node (i_1+1..i_N+1).
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<std::vector<double>> axes);

  /// `cells` equal cells on [0, b_max] along each of `n_params` axes.
  static Grid uniform(int n_params, double b_max, int cells);

  /// Axis = `lead_cells` equal cells on [0, a] followed by `window_cells`
  /// equal cells on [a, b]. Window nodes then sit exactly on the grid.
  static Grid windowed(int n_params, double a, double b, int lead_cells, int window_cells);

  int params() const { return static_cast<int>(axes_.size()); }
  const std::vector<double>& axis(int k) const { return axes_[static_cast<std::size_t>(k)]; }
  const std::vector<std::vector<double>>& axes() const { return axes_; }

  std::size_t nodes_along(int k) const { return axis(k).size(); }
  std::size_t node_count() const { return node_count_; }
  std::size_t cell_count() const { return cell_count_; }

  /// Flat node index of a multi-index.
  std::size_t node_index(std::span<const std::size_t> multi) const;
  /// Multi-index of a flat node index.
  std::vector<std::size_t> node_multi(std::size_t flat) const;
  /// Parameter coordinates of a node.
  std::vector<double> node_point(std::size_t flat) const;

  /// Lebesgue measure of a cell.
  double cell_volume(std::span<const std::size_t> multi) const;

  /// Index of `value` on axis k, or -1 when the value is not a node
  /// (relative tolerance 1e-12).
  long find_node(int k, double value) const;

  /// Largest cell diameter among cells whose lower corner lies in [a, b]^N.
  double max_cell_diameter(double a, double b) const;

  bool operator==(const Grid& other) const { return axes_ == other.axes_; }

 private:
  std::vector<std::vector<double>> axes_;
  std::size_t node_count_ = 0;
  std::size_t cell_count_ = 0;
};

/// Sampled field on a Grid: d values per node, optionally the driving noise
/// increments (d per cell) that produced it.
struct FieldPath {
  Grid grid;
  int d = 1;
  std::vector<double> values;      ///< node-major, values[node * d + k]
  std::vector<double> increments;  ///< cell-major, empty when not retained

  std::span<const double> at(std::size_t node) const {
    return {values.data() + node * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
  }
  std::span<double> at(std::size_t node) {
    return {values.data() + node * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
  }
  bool has_increments() const { return !increments.empty(); }
};

/// Nodes of `grid` whose coordinates all lie in [a, b]. Throws when the
/// window has no node or is not representable on the grid.
std::vector<std::size_t> window_nodes(const Grid& grid, double a, double b);

/// Product-trapezoid quadrature weights for the window nodes returned by
/// window_nodes(grid, a, b); they integrate a function over [a, b]^N.
std::vector<double> window_weights(const Grid& grid, double a, double b);

}  // namespace sheetcap
