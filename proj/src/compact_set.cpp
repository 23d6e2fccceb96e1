#include "sheetcap/compact_set.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace sheetcap {

namespace {

int primitive_dim(const Primitive& p) {
  if (const auto* b = std::get_if<Ball>(&p)) {
    if (!(b->radius >= 0.0) || !std::isfinite(b->radius)) throw std::invalid_argument("ball: radius must be >= 0");
    return static_cast<int>(b->center.size());
  }
  const auto& x = std::get<Box>(p);
  if (x.lower.size() != x.upper.size()) throw std::invalid_argument("box: corner dimensions differ");
  for (std::size_t i = 0; i < x.lower.size(); ++i)
    if (!(x.lower[i] <= x.upper[i])) throw std::invalid_argument("box: lower corner must not exceed upper corner");
  return static_cast<int>(x.lower.size());
}

double dist2(const Primitive& p, std::span<const double> x) {
  if (const auto* b = std::get_if<Ball>(&p)) {
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double t = x[i] - b->center[i];
      r2 += t * t;
    }
    const double gap = std::sqrt(r2) - b->radius;
    return gap > 0.0 ? gap * gap : 0.0;
  }
  const auto& bx = std::get<Box>(p);
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x[i] < bx.lower[i] ? bx.lower[i] - x[i] : x[i] > bx.upper[i] ? x[i] - bx.upper[i] : 0.0;
    r2 += t * t;
  }
  return r2;
}

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw std::invalid_argument("set: bad number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

CompactSet::CompactSet(std::vector<Primitive> components) : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("set: needs at least one primitive");
  dim_ = primitive_dim(components_.front());
  if (dim_ < 1) throw std::invalid_argument("set: dimension must be >= 1");
  for (const auto& p : components_)
    if (primitive_dim(p) != dim_) throw std::invalid_argument("set: primitives differ in dimension");
}

CompactSet CompactSet::ball(std::vector<double> center, double radius) {
  return CompactSet({Ball{std::move(center), radius}});
}

CompactSet CompactSet::box(std::vector<double> lower, std::vector<double> upper) {
  return CompactSet({Box{std::move(lower), std::move(upper)}});
}

CompactSet CompactSet::point(std::vector<double> p) { return CompactSet({Box{p, p}}); }

bool CompactSet::contains(std::span<const double> x) const { return distance_squared(x) == 0.0; }

double CompactSet::distance_squared(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("set: point has wrong dimension");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : components_) best = std::min(best, dist2(p, x));
  return best;
}

double CompactSet::distance(std::span<const double> x) const { return std::sqrt(distance_squared(x)); }

void CompactSet::bounding_box(std::vector<double>& lower, std::vector<double>& upper) const {
  const auto d = static_cast<std::size_t>(dim_);
  lower.assign(d, std::numeric_limits<double>::infinity());
  upper.assign(d, -std::numeric_limits<double>::infinity());
  for (const auto& p : components_) {
    for (std::size_t i = 0; i < d; ++i) {
      double lo, hi;
      if (const auto* b = std::get_if<Ball>(&p)) {
        lo = b->center[i] - b->radius;
        hi = b->center[i] + b->radius;
      } else {
        lo = std::get<Box>(p).lower[i];
        hi = std::get<Box>(p).upper[i];
      }
      lower[i] = std::min(lower[i], lo);
      upper[i] = std::max(upper[i], hi);
    }
  }
}

bool CompactSet::is_finite() const {
  return std::all_of(components_.begin(), components_.end(), [](const Primitive& p) {
    if (const auto* b = std::get_if<Ball>(&p)) return b->radius == 0.0;
    const auto& x = std::get<Box>(p);
    return x.lower == x.upper;
  });
}

CompactSet CompactSet::translated(std::span<const double> v) const {
  if (v.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("set: shift has wrong dimension");
  std::vector<Primitive> out = components_;
  for (auto& p : out) {
    if (auto* b = std::get_if<Ball>(&p)) {
      for (std::size_t i = 0; i < v.size(); ++i) b->center[i] += v[i];
    } else {
      auto& x = std::get<Box>(p);
      for (std::size_t i = 0; i < v.size(); ++i) {
        x.lower[i] += v[i];
        x.upper[i] += v[i];
      }
    }
  }
  return CompactSet(std::move(out));
}

CompactSet CompactSet::scaled(double s) const {
  if (!(s > 0.0)) throw std::invalid_argument("set: scale must be > 0");
  std::vector<Primitive> out = components_;
  for (auto& p : out) {
    if (auto* b = std::get_if<Ball>(&p)) {
      for (auto& c : b->center) c *= s;
      b->radius *= s;
    } else {
      auto& x = std::get<Box>(p);
      for (auto& c : x.lower) c *= s;
      for (auto& c : x.upper) c *= s;
    }
  }
  return CompactSet(std::move(out));
}

std::string CompactSet::describe() const {
  std::string out;
  for (const auto& p : components_) {
    if (!out.empty()) out += '+';
    if (const auto* b = std::get_if<Ball>(&p)) {
      out += fmt::format("ball:{}:{}", fmt::join(b->center, ","), b->radius);
    } else {
      const auto& x = std::get<Box>(p);
      if (x.lower == x.upper)
        out += fmt::format("point:{}", fmt::join(x.lower, ","));
      else
        out += fmt::format("box:{}:{}", fmt::join(x.lower, ","), fmt::join(x.upper, ","));
    }
  }
  return out;
}

CompactSet parse_set(const std::string& text) {
  std::vector<Primitive> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, '+')) {
    std::vector<std::string> fields;
    std::stringstream fs(item);
    std::string f;
    while (std::getline(fs, f, ':')) fields.push_back(f);
    if (fields.empty()) throw std::invalid_argument("set: empty primitive");
    const std::string& kind = fields[0];
    if (kind == "ball" && fields.size() == 3) {
      const auto r = parse_numbers(fields[2]);
      if (r.size() != 1) throw std::invalid_argument("set: ball radius must be one number");
      parts.emplace_back(Ball{parse_numbers(fields[1]), r[0]});
    } else if (kind == "box" && fields.size() == 3) {
      parts.emplace_back(Box{parse_numbers(fields[1]), parse_numbers(fields[2])});
    } else if (kind == "point" && fields.size() == 2) {
      auto p = parse_numbers(fields[1]);
      parts.emplace_back(Box{p, p});
    } else {
      throw std::invalid_argument("set: cannot parse '" + item + "'");
    }
  }
  return CompactSet(std::move(parts));
}

}  // namespace sheetcap
