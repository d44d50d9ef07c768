#pragma once

#include <cmath>

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

#include "hoisynth/core/types.hpp"

namespace hoisynth {

inline double scalar_value(double x) { return x; }
template <typename D>
double scalar_value(const Eigen::AutoDiffScalar<D>& x) {
  return x.value();
}

template <typename T>
Eigen::Matrix<T, 3, 3> skew(const Eigen::Matrix<T, 3, 1>& w) {
  Eigen::Matrix<T, 3, 3> k;
  k << T(0), -w.z(), w.y(),  //
      w.z(), T(0), -w.x(),   //
      -w.y(), w.x(), T(0);
  return k;
}

/// Axis-angle vector to rotation matrix (Rodrigues).
///
/// Small angles use a series in theta^2 so the map stays differentiable
/// at the origin for autodiff scalars.
template <typename T>
Eigen::Matrix<T, 3, 3> axis_angle_to_matrix(const Eigen::Matrix<T, 3, 1>& w) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T theta2 = w.squaredNorm();
  T a;  // sin(theta) / theta
  T b;  // (1 - cos(theta)) / theta^2
  if (scalar_value(theta2) < 1e-8) {
    a = T(1.0) - theta2 / T(6.0) + theta2 * theta2 / T(120.0);
    b = T(0.5) - theta2 / T(24.0) + theta2 * theta2 / T(720.0);
  } else {
    const T theta = sqrt(theta2);
    a = sin(theta) / theta;
    b = (T(1.0) - cos(theta)) / theta2;
  }
  const Eigen::Matrix<T, 3, 3> k = skew(w);
  return Eigen::Matrix<T, 3, 3>::Identity() + a * k + b * (k * k);
}

inline Vec3 matrix_to_axis_angle(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

/// Rotation of the articulated part: right-handed by `angle` about -z.
inline Mat3 articulation_rotation(double angle) {
  return Eigen::AngleAxisd(-angle, Vec3::UnitZ()).toRotationMatrix();
}

}  // namespace hoisynth
