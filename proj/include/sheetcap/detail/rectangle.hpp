#pragma once

namespace sheetcap::detail {

// One step of the planar rectangle recursion. The sheet integrator and the
// SPDE solver both go through here so their rounding is identical.
inline double rectangle_step(double left, double below, double corner, double increment) {
  return ((left + below) - corner) + increment;
}

}  // namespace sheetcap::detail
