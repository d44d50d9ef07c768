#pragma once

#include <cmath>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/geometry/rotation.hpp"

namespace hoisynth {

/// Proper rigid motion x -> R x + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  /// From a 6-D global state laid out as [axis-angle (3) | translation (3)].
  static RigidTransform from_global_state(const Vec6& g) {
    require(g.allFinite(), "global state must be finite");
    return {axis_angle_to_matrix<double>(g.head<3>()), g.tail<3>()};
  }

  bool is_valid(double tol = 1e-9) const {
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol && translation.allFinite();
  }

  RigidTransform inverse() const {
    const Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  Points apply(const Points& pts) const {
    Points out(pts.rows(), 3);
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      out.row(i) = (rotation * pts.row(i).transpose() + translation).transpose();
    return out;
  }

  /// Applies the inverse as R^T (x - t) without forming the inverse first.
  Points apply_inverse(const Points& pts) const {
    Points out(pts.rows(), 3);
    const Mat3 rt = rotation.transpose();
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      out.row(i) = (rt * (pts.row(i).transpose() - translation)).transpose();
    return out;
  }
};

}  // namespace hoisynth
