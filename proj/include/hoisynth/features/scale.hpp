#pragma once

#include "hoisynth/core/error.hpp"
#include "hoisynth/geometry/articulated.hpp"

namespace hoisynth {

inline constexpr double kDefaultMargin = 0.15;

/// Object scale: multiplying canonical coordinates by `value` puts the
/// farthest vertex (articulation opened) at radius 1 - margin.
struct ObjectScale {
  double value = 1.0;
  double margin = kDefaultMargin;
};

inline ObjectScale compute_scale(const ArticulatedObject& obj, double margin = kDefaultMargin) {
  require(margin > 0.0 && margin < 1.0, "d_margin must lie in (0, 1)");
  const Points opened = obj.posed_canonical(obj.opening_angle());
  const double extent = opened.rowwise().norm().maxCoeff();
  require(extent > 0.0, "object has zero extent; scale undefined");
  return {(1.0 - margin) / extent, margin};
}

}  // namespace hoisynth
