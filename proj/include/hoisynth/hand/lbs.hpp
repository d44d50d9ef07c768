#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/geometry/rotation.hpp"
#include "hoisynth/hand/model.hpp"

namespace hoisynth {

using PoseVector = Eigen::Matrix<double, kPoseDim, 1>;
using ShapeVector = Eigen::Matrix<double, kShapeCount, 1>;
using ParamJacobian = Eigen::Matrix<double, Eigen::Dynamic, kParamDim, Eigen::RowMajor>;

/// World-space bone transforms: a point x on bone k maps to
/// x + (R[k] - I)(x - j[k]) + d[k] + root translation, i.e. R[k](x - j[k])
/// + j[k] + d[k]. Keeping the displacement d[k] separate makes the zero pose
/// reproduce the template bit for bit.
template <typename T>
struct BoneState {
  using M3 = Eigen::Matrix<T, 3, 3>;
  using V3 = Eigen::Matrix<T, 3, 1>;
  std::array<M3, kJointCount> rotation;
  std::array<V3, kJointCount> displacement;
  std::array<V3, kJointCount> joint;  // shaped rest joints
};

template <typename T>
BoneState<T> compute_bones(const HandModel& model, const Eigen::Matrix<T, kPoseDim, 1>& theta,
                           const Eigen::Matrix<T, kShapeCount, 1>& beta) {
  using V3 = Eigen::Matrix<T, 3, 1>;
  BoneState<T> b;
  for (int k = 0; k < kJointCount; ++k) {
    V3 j;
    for (int c = 0; c < 3; ++c) {
      T acc = T(model.joint_rest(k, c));
      for (int s = 0; s < kShapeCount; ++s) acc += T(model.joint_shape_dirs(3 * k + c, s)) * beta(s);
      j(c) = acc;
    }
    b.joint[static_cast<std::size_t>(k)] = j;
  }
  for (int k = 0; k < kJointCount; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const V3 w = k == 0 ? V3(theta.template segment<3>(3)) : V3(theta.template segment<3>(6 + 3 * (k - 1)));
    const auto local = axis_angle_to_matrix<T>(w);
    const int p = model.parents[uk];
    if (p < 0) {
      b.rotation[uk] = local;
      b.displacement[uk] = V3::Zero();
    } else {
      const auto up = static_cast<std::size_t>(p);
      b.rotation[uk] = b.rotation[up] * local;
      b.displacement[uk] =
          (b.rotation[up] - Eigen::Matrix<T, 3, 3>::Identity()) * (b.joint[uk] - b.joint[up]) + b.displacement[up];
    }
  }
  return b;
}

inline void check_params(const PoseVector& theta, const ShapeVector& beta) {
  if (!all_finite(theta) || !all_finite(beta)) throw InvalidInput("hand parameters must be finite");
}

inline PoseVector pose_from(const Eigen::Ref<const VecX>& theta) {
  if (theta.size() != kPoseDim) throw InvalidInput("pose vector must have 51 entries");
  return theta;
}

inline ShapeVector shape_from(const Eigen::Ref<const VecX>& beta) {
  if (beta.size() != kShapeCount) throw InvalidInput("shape vector must have 10 entries");
  return beta;
}

inline Vec3 shaped_vertex(const HandModel& model, Eigen::Index i, const ShapeVector& beta) {
  return model.template_vertices.row(i).transpose() + model.shape_dirs.middleRows<3>(3 * i) * beta;
}

inline Vec3 skin_vertex(const HandModel& model, const BoneState<double>& bones, Eigen::Index i, const Vec3& vs) {
  Vec3 offset = Vec3::Zero();
  for (const auto& [k, wk] : model.influences[static_cast<std::size_t>(i)]) {
    const auto uk = static_cast<std::size_t>(k);
    offset += wk * ((bones.rotation[uk] - Mat3::Identity()) * (vs - bones.joint[uk]) + bones.displacement[uk]);
  }
  return vs + offset;
}

/// Posed hand surface for one frame.
inline Points lbs_forward(const HandModel& model, const PoseVector& theta, const ShapeVector& beta) {
  check_params(theta, beta);
  const BoneState<double> bones = compute_bones<double>(model, theta, beta);
  const Vec3 root = theta.head<3>();
  Points out(model.vertex_count(), 3);
  for (Eigen::Index i = 0; i < model.vertex_count(); ++i)
    out.row(i) = (skin_vertex(model, bones, i, shaped_vertex(model, i, beta)) + root).transpose();
  return out;
}

/// Posed positions of a subset of vertices (e.g. the keypoints).
inline Points lbs_subset(const HandModel& model, const PoseVector& theta, const ShapeVector& beta,
                         const std::vector<int>& subset) {
  check_params(theta, beta);
  const BoneState<double> bones = compute_bones<double>(model, theta, beta);
  const Vec3 root = theta.head<3>();
  Points out(static_cast<Eigen::Index>(subset.size()), 3);
  for (std::size_t r = 0; r < subset.size(); ++r) {
    const Eigen::Index i = subset[r];
    require(i >= 0 && i < model.vertex_count(), "vertex index out of range");
    out.row(static_cast<Eigen::Index>(r)) = (skin_vertex(model, bones, i, shaped_vertex(model, i, beta)) + root).transpose();
  }
  return out;
}

/// Bone values with derivatives w.r.t. the 61 parameters [theta | beta].
struct BoneDerivatives {
  BoneState<double> value;
  std::array<Eigen::Matrix<double, 9, kParamDim>, kJointCount> d_rotation;  // row r*3+c
  std::array<Eigen::Matrix<double, 3, kParamDim>, kJointCount> d_translation;  // of j + d
  std::array<Eigen::Matrix<double, 3, kParamDim>, kJointCount> d_joint;
};

inline BoneDerivatives bone_derivatives(const HandModel& model, const PoseVector& theta, const ShapeVector& beta) {
  using Grad = Eigen::Matrix<double, kParamDim, 1>;
  using AD = Eigen::AutoDiffScalar<Grad>;
  Eigen::Matrix<AD, kPoseDim, 1> th;
  Eigen::Matrix<AD, kShapeCount, 1> be;
  for (int i = 0; i < kPoseDim; ++i) th(i) = AD(theta(i), kParamDim, i);
  for (int i = 0; i < kShapeCount; ++i) be(i) = AD(beta(i), kParamDim, kPoseDim + i);
  const BoneState<AD> ad = compute_bones<AD>(model, th, be);
  BoneDerivatives out;
  for (std::size_t k = 0; k < static_cast<std::size_t>(kJointCount); ++k) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        const AD& x = ad.rotation[k](r, c);
        out.value.rotation[k](r, c) = x.value();
        out.d_rotation[k].row(r * 3 + c) = x.derivatives().transpose();
      }
      out.value.displacement[k](r) = ad.displacement[k](r).value();
      out.d_translation[k].row(r) =
          (ad.displacement[k](r).derivatives() + ad.joint[k](r).derivatives()).transpose();
      out.value.joint[k](r) = ad.joint[k](r).value();
      out.d_joint[k].row(r) = ad.joint[k](r).derivatives().transpose();
    }
  }
  return out;
}

/// Jacobian of the posed subset vertices: rows 3r..3r+2 for subset[r],
/// columns [theta (51) | beta (10)].
inline ParamJacobian lbs_jacobian(const HandModel& model, const PoseVector& theta, const ShapeVector& beta,
                                  const std::vector<int>& subset) {
  check_params(theta, beta);
  const BoneDerivatives bd = bone_derivatives(model, theta, beta);
  ParamJacobian jac = ParamJacobian::Zero(3 * static_cast<Eigen::Index>(subset.size()), kParamDim);
  for (std::size_t r = 0; r < subset.size(); ++r) {
    const Eigen::Index i = subset[r];
    require(i >= 0 && i < model.vertex_count(), "vertex index out of range");
    const Vec3 vs = shaped_vertex(model, i, beta);
    auto block = jac.middleRows<3>(3 * static_cast<Eigen::Index>(r));
    for (const auto& [k, wk] : model.influences[static_cast<std::size_t>(i)]) {
      const auto uk = static_cast<std::size_t>(k);
      const Vec3 x = vs - bd.value.joint[uk];
      for (int c = 0; c < 3; ++c) block += wk * x(c) * bd.d_rotation[uk](Eigen::seqN(c, 3, 3), Eigen::all);
      block += wk * (bd.d_translation[uk] - bd.value.rotation[uk] * bd.d_joint[uk]);
      block.rightCols<kShapeCount>() += wk * bd.value.rotation[uk] * model.shape_dirs.middleRows<3>(3 * i);
    }
    block.leftCols<3>() += Mat3::Identity();
  }
  return jac;
}

/// Gradient of sum_i <g_i, v_i(theta, beta)> for a V x 3 upstream gradient.
inline Eigen::Matrix<double, kParamDim, 1> lbs_vjp(const HandModel& model, const PoseVector& theta,
                                                   const ShapeVector& beta, const Points& upstream) {
  check_params(theta, beta);
  require(upstream.rows() == model.vertex_count(), "upstream gradient must be V x 3");
  const BoneDerivatives bd = bone_derivatives(model, theta, beta);
  std::array<Mat3, kJointCount> m_acc{};
  std::array<Vec3, kJointCount> a_acc{};
  for (int k = 0; k < kJointCount; ++k) {
    m_acc[static_cast<std::size_t>(k)].setZero();
    a_acc[static_cast<std::size_t>(k)].setZero();
  }
  Eigen::Matrix<double, kParamDim, 1> grad = Eigen::Matrix<double, kParamDim, 1>::Zero();
  Vec3 total = Vec3::Zero();
  for (Eigen::Index i = 0; i < model.vertex_count(); ++i) {
    const Vec3 g = upstream.row(i).transpose();
    if (g.isZero(0.0)) continue;
    total += g;
    const Vec3 vs = shaped_vertex(model, i, beta);
    Vec3 back = Vec3::Zero();
    for (const auto& [k, wk] : model.influences[static_cast<std::size_t>(i)]) {
      const auto uk = static_cast<std::size_t>(k);
      m_acc[uk] += wk * g * (vs - bd.value.joint[uk]).transpose();
      a_acc[uk] += wk * g;
      back += wk * bd.value.rotation[uk].transpose() * g;
    }
    grad.tail<kShapeCount>() += model.shape_dirs.middleRows<3>(3 * i).transpose() * back;
  }
  for (std::size_t k = 0; k < static_cast<std::size_t>(kJointCount); ++k) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) grad += m_acc[k](r, c) * bd.d_rotation[k].row(r * 3 + c).transpose();
    grad += (bd.d_translation[k] - bd.value.rotation[k] * bd.d_joint[k]).transpose() * a_acc[k];
  }
  grad.head<3>() += total;
  return grad;
}

}  // namespace hoisynth
