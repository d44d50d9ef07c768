#pragma once

#include <string>

#include "hoisynth/core/container.hpp"
#include "hoisynth/hand/model.hpp"

namespace hoisynth {

inline constexpr int kHandModelFileVersion = 1;

/// Shape bases are stored as (10, V, 3) and (10, 16, 3). Externally supplied
/// hands with the same tree can be converted into this container and loaded
/// in place of the procedural model.
inline Container hand_model_container(const HandModel& m) {
  Container c;
  c.kind = "hand-model";
  c.version = kHandModelFileVersion;
  c.meta = {{"side", side_name(m.side)}, {"keypoint_version", kKeypointVersion}};
  c.put_matrix("template", m.template_vertices);
  RowMatX faces = m.faces.cast<double>();
  c.put("faces", DType::kI32, {faces.rows(), 3}, faces.data());
  c.put_matrix("weights", m.weights);
  std::vector<int> parents(m.parents.begin(), m.parents.end());
  c.put_ints("parents", {kJointCount}, parents);
  c.put_matrix("joint_rest", m.joint_rest);
  const RowMatX sd = m.shape_dirs.transpose();  // 10 x 3V
  c.put("shape_dirs", DType::kF64, {kShapeCount, m.vertex_count(), 3}, sd.data());
  const RowMatX jd = m.joint_shape_dirs.transpose();
  c.put("joint_shape_dirs", DType::kF64, {kShapeCount, kJointCount, 3}, jd.data());
  c.put_ints("keypoints", {static_cast<std::int64_t>(m.keypoints.size())}, m.keypoints);
  c.put_matrix("flex_axes", m.flex_axes);
  const Eigen::Matrix<double, 2, 3, Eigen::RowMajor> palm = (Eigen::Matrix<double, 2, 3, Eigen::RowMajor>() << m.palm_normal.transpose(), m.palm_center.transpose()).finished();
  c.put_matrix("palm", palm);
  return c;
}

inline HandModel hand_model_from_container(const Container& c) {
  if (c.kind != "hand-model") throw FormatError("container is not a hand model");
  if (c.version != kHandModelFileVersion) throw FormatError("unsupported hand model version");
  HandModel m;
  m.side = parse_side(c.meta.value("side", "right"));
  m.template_vertices = c.matrix("template");
  m.faces = c.matrix("faces").cast<int>();
  m.weights = c.matrix("weights");
  const auto parents = c.ints("parents");
  if (parents.size() != kJointCount) throw FormatError("hand model must have 16 joints");
  std::copy(parents.begin(), parents.end(), m.parents.begin());
  m.joint_rest = c.matrix("joint_rest");
  const auto v = m.template_vertices.rows();
  const auto sd = c.values("shape_dirs");
  if (sd.size() != static_cast<std::size_t>(kShapeCount * 3 * v)) throw FormatError("shape basis has the wrong size");
  m.shape_dirs = Eigen::Map<const RowMatX>(sd.data(), kShapeCount, 3 * v).transpose();
  const auto jd = c.values("joint_shape_dirs");
  if (jd.size() != static_cast<std::size_t>(kShapeCount * 3 * kJointCount))
    throw FormatError("joint shape basis has the wrong size");
  m.joint_shape_dirs = Eigen::Map<const RowMatX>(jd.data(), kShapeCount, 3 * kJointCount).transpose();
  m.keypoints = c.ints("keypoints");
  m.flex_axes = c.matrix("flex_axes");
  const RowMatX palm = c.matrix("palm");
  m.palm_normal = palm.row(0).transpose();
  m.palm_center = palm.row(1).transpose();
  m.finalize();
  m.validate();
  return m;
}

inline void save_hand_model(const std::string& path, const HandModel& m) {
  save_container(path, hand_model_container(m));
}

inline HandModel load_hand_model(const std::string& path) {
  return hand_model_from_container(load_container(path, "hand-model"));
}

}  // namespace hoisynth
