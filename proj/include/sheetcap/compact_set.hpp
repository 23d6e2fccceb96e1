#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sheetcap {

struct Ball {
  std::vector<double> center;
  double radius = 0.0;
};

/// Closed box [lower, upper]. A point is the box with lower == upper.
struct Box {
  std::vector<double> lower, upper;
};

using Primitive = std::variant<Ball, Box>;

/// Finite union of closed balls and boxes in R^d.
class CompactSet {
 public:
  explicit CompactSet(std::vector<Primitive> components);

  static CompactSet ball(std::vector<double> center, double radius);
  static CompactSet box(std::vector<double> lower, std::vector<double> upper);
  static CompactSet point(std::vector<double> p);

  int dim() const { return dim_; }
  const std::vector<Primitive>& components() const { return components_; }

  bool contains(std::span<const double> x) const;
  /// Euclidean distance from x to the set (0 inside).
  double distance(std::span<const double> x) const;
  /// Squared distance; cheaper in hot loops.
  double distance_squared(std::span<const double> x) const;

  void bounding_box(std::vector<double>& lower, std::vector<double>& upper) const;
  /// True when every component is a single point.
  bool is_finite() const;

  /// Same set shifted by v or scaled about the origin by s > 0.
  CompactSet translated(std::span<const double> v) const;
  CompactSet scaled(double s) const;

  std::string describe() const;

 private:
  std::vector<Primitive> components_;
  int dim_ = 0;
};

/// Parses "ball:c1,...,cd:r", "box:l1,...,ld:u1,...,ud" or "point:x1,...,xd";
/// several primitives may be joined with '+'.
CompactSet parse_set(const std::string& text);

}  // namespace sheetcap
