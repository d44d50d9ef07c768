#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/geometry/mesh.hpp"
#include "hoisynth/geometry/primitives.hpp"

namespace hoisynth {

inline constexpr int kJointCount = 16;
inline constexpr int kShapeCount = 10;
inline constexpr int kPoseDim = 51;   // root translation 3, root rotation 3, 15 joints x 3
inline constexpr int kParamDim = kPoseDim + kShapeCount;
inline constexpr int kDefaultKeypoints = 128;
inline constexpr int kKeypointVersion = 1;

enum class Side { kLeft = 0, kRight = 1 };

inline const char* side_name(Side s) { return s == Side::kLeft ? "left" : "right"; }

inline Side parse_side(const std::string& s) {
  if (s == "left") return Side::kLeft;
  if (s == "right") return Side::kRight;
  throw InvalidInput("unknown hand side '" + s + "'");
}

/// Parametric hand: shaped template, 16-joint kinematic tree, linear blend
/// skinning. Joint order: wrist, then index, middle, ring, pinky, thumb with
/// three joints each (proximal to distal).
struct HandModel {
  Side side = Side::kRight;
  Points template_vertices;
  Faces faces;
  RowMatX weights;                       // V x 16
  std::array<int, kJointCount> parents{};
  Points joint_rest;                     // 16 x 3
  RowMatX shape_dirs;                    // 3V x 10, rows interleave x, y, z per vertex
  RowMatX joint_shape_dirs;              // 48 x 10
  std::vector<int> keypoints;
  Points flex_axes;                      // 16 x 3; positive rotation curls toward the palm
  Vec3 palm_normal = Vec3(0, 0, -1);     // rest frame, points out of the palm
  Vec3 palm_center = Vec3::Zero();       // on the palm surface

  // Sparse skinning rows, rebuilt by finalize().
  std::vector<std::vector<std::pair<int, double>>> influences;

  Eigen::Index vertex_count() const { return template_vertices.rows(); }
  int keypoint_count() const { return static_cast<int>(keypoints.size()); }

  void validate() const {
    const Eigen::Index v = template_vertices.rows();
    require(v > 0 && all_finite(template_vertices), "hand template must be non-empty and finite");
    require(weights.rows() == v && weights.cols() == kJointCount, "skinning weights must be V x 16");
    require(weights.minCoeff() >= 0.0, "skinning weights must be nonnegative");
    for (Eigen::Index i = 0; i < v; ++i)
      require(std::abs(weights.row(i).sum() - 1.0) <= 1e-6, "skinning weight rows must sum to 1");
    require(joint_rest.rows() == kJointCount && all_finite(joint_rest), "joint rest positions must be 16 x 3");
    require(shape_dirs.rows() == 3 * v && shape_dirs.cols() == kShapeCount, "shape basis must be 3V x 10");
    require(joint_shape_dirs.rows() == 3 * kJointCount && joint_shape_dirs.cols() == kShapeCount,
            "joint shape basis must be 48 x 10");
    require(parents[0] == -1, "joint 0 must be the root");
    for (int k = 1; k < kJointCount; ++k)
      require(parents[static_cast<std::size_t>(k)] >= 0 && parents[static_cast<std::size_t>(k)] < k,
              "kinematic tree must list parents before children");
    require(!keypoints.empty(), "keypoint set must be non-empty");
    for (int idx : keypoints) require(idx >= 0 && idx < v, "keypoint index out of range");
    for (Eigen::Index f = 0; f < faces.rows(); ++f)
      for (int c = 0; c < 3; ++c) require(faces(f, c) >= 0 && faces(f, c) < v, "hand face index out of range");
  }

  void finalize() {
    influences.assign(static_cast<std::size_t>(template_vertices.rows()), {});
    for (Eigen::Index i = 0; i < weights.rows(); ++i)
      for (int k = 0; k < kJointCount; ++k)
        if (weights(i, k) > 0.0) influences[static_cast<std::size_t>(i)].emplace_back(k, weights(i, k));
  }
};

/// Greedy farthest-point sampling, starting from vertex 0.
inline std::vector<int> farthest_point_indices(const Points& pts, int count) {
  require(count > 0 && count <= pts.rows(), "sample count must be in [1, number of points]");
  std::vector<int> out{0};
  Eigen::VectorXd d2 = (pts.rowwise() - pts.row(0)).rowwise().squaredNorm();
  while (static_cast<int>(out.size()) < count) {
    Eigen::Index next = 0;
    d2.maxCoeff(&next);
    out.push_back(static_cast<int>(next));
    d2 = d2.cwiseMin((pts.rowwise() - pts.row(next)).rowwise().squaredNorm());
  }
  return out;
}

namespace detail {

struct FingerSpec {
  Vec3 base;
  Vec3 dir;
  std::array<double, 3> lengths;
  double radius;
};

// Right hand in its rest frame: wrist at the origin, fingers along +y, palm
// facing -z, thumb on the -x side.
inline std::array<FingerSpec, 5> right_hand_fingers() {
  return {{
      {Vec3(-0.029, 0.090, 0.0), Vec3(0, 1, 0), {0.044, 0.026, 0.022}, 0.0085},
      {Vec3(-0.010, 0.092, 0.0), Vec3(0, 1, 0), {0.048, 0.030, 0.024}, 0.0088},
      {Vec3(0.010, 0.090, 0.0), Vec3(0, 1, 0), {0.045, 0.029, 0.023}, 0.0082},
      {Vec3(0.028, 0.085, 0.0), Vec3(0, 1, 0), {0.036, 0.022, 0.020}, 0.0072},
      {Vec3(-0.032, 0.022, -0.006), Vec3(-0.62, 0.76, -0.2).normalized(), {0.040, 0.032, 0.028}, 0.0098},
  }};
}

// Shape function f_s(p) for point p belonging to `finger` (-1 for palm/wrist).
inline Vec3 shape_offset(int s, const Vec3& p, int finger, const std::array<FingerSpec, 5>& fingers) {
  switch (s) {
    case 0: return 0.04 * p;
    case 1: return Vec3(0.05 * p.x(), 0, 0);
    case 2: return Vec3(0, 0.05 * p.y(), 0);
    case 3: return Vec3(0, 0, 0.08 * p.z());
    case 9:
      return finger >= 0 ? Vec3(0.1 * fingers[static_cast<std::size_t>(finger)].base.x(), 0, 0) : Vec3::Zero();
    default: {
      const int f = s - 4;
      if (finger != f) return Vec3::Zero();
      const FingerSpec& spec = fingers[static_cast<std::size_t>(f)];
      return 0.08 * (p - spec.base).dot(spec.dir) * spec.dir;
    }
  }
}

}  // namespace detail

/// Procedurally generated hand with about 800 vertices. The left hand is the
/// mirror image of the right across x = 0.
inline HandModel make_hand_model(Side side = Side::kRight, int keypoint_count = kDefaultKeypoints) {
  const auto fingers = detail::right_hand_fingers();
  HandModel m;
  m.side = Side::kRight;

  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
  std::vector<std::array<double, kJointCount>> w;
  std::vector<int> owner;  // finger id or -1

  const auto append = [&](const Mesh& part, const auto& transform, const auto& weight_fn, int finger) {
    const int base = static_cast<int>(verts.size());
    for (Eigen::Index i = 0; i < part.vertices.rows(); ++i) {
      const Vec3 local = part.vertices.row(i).transpose();
      verts.push_back(transform(local));
      w.push_back(weight_fn(local));
      owner.push_back(finger);
    }
    for (Eigen::Index f = 0; f < part.faces.rows(); ++f)
      tris.push_back({base + part.faces(f, 0), base + part.faces(f, 1), base + part.faces(f, 2)});
  };

  const Mesh palm = make_box(Vec3(-0.042, -0.004, -0.013), Vec3(0.038, 0.094, 0.013), 0.0165);
  append(palm, [](const Vec3& p) { return p; },
         [](const Vec3&) {
           std::array<double, kJointCount> r{};
           r[0] = 1.0;
           return r;
         },
         -1);

  m.parents[0] = -1;
  m.joint_rest.resize(kJointCount, 3);
  m.joint_rest.row(0).setZero();
  m.flex_axes.resize(kJointCount, 3);
  m.flex_axes.row(0) = Vec3(0, 1, 0).cross(m.palm_normal).normalized().transpose();
  std::array<int, kJointCount> joint_finger{};
  joint_finger[0] = -1;

  for (int f = 0; f < 5; ++f) {
    const auto& spec = fingers[static_cast<std::size_t>(f)];
    const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), spec.dir);
    Vec3 start = spec.base;
    for (int s = 0; s < 3; ++s) {
      const int joint = 1 + 3 * f + s;
      const int parent = s == 0 ? 0 : joint - 1;
      m.parents[static_cast<std::size_t>(joint)] = parent;
      joint_finger[static_cast<std::size_t>(joint)] = f;
      m.joint_rest.row(joint) = start.transpose();
      m.flex_axes.row(joint) = spec.dir.cross(m.palm_normal).normalized().transpose();
      const double len = spec.lengths[static_cast<std::size_t>(s)];
      const double radius = spec.radius * (1.0 - 0.07 * s);
      const Mesh seg = make_cylinder(radius, 0.0, len, 0.0125);
      const Vec3 origin = start;
      append(seg, [&](const Vec3& p) { return Vec3(origin + q * p); },
             [&](const Vec3& p) {
               std::array<double, kJointCount> r{};
               const double blend = 0.35 * len;
               const double wp = p.z() < blend ? 0.5 * (1.0 - p.z() / blend) : 0.0;
               r[static_cast<std::size_t>(parent)] = wp;
               r[static_cast<std::size_t>(joint)] += 1.0 - wp;
               return r;
             },
             f);
      start += len * spec.dir;
    }
  }

  const auto nv = static_cast<Eigen::Index>(verts.size());
  m.template_vertices.resize(nv, 3);
  m.weights.resize(nv, kJointCount);
  m.shape_dirs.resize(3 * nv, kShapeCount);
  for (Eigen::Index i = 0; i < nv; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    m.template_vertices.row(i) = verts[ui].transpose();
    for (int k = 0; k < kJointCount; ++k) m.weights(i, k) = w[ui][static_cast<std::size_t>(k)];
    for (int s = 0; s < kShapeCount; ++s) m.shape_dirs.block<3, 1>(3 * i, s) = detail::shape_offset(s, verts[ui], owner[ui], fingers);
  }
  m.joint_shape_dirs.resize(3 * kJointCount, kShapeCount);
  for (int k = 0; k < kJointCount; ++k)
    for (int s = 0; s < kShapeCount; ++s)
      m.joint_shape_dirs.block<3, 1>(3 * k, s) =
          detail::shape_offset(s, m.joint_rest.row(k).transpose(), joint_finger[static_cast<std::size_t>(k)], fingers);
  m.faces.resize(static_cast<Eigen::Index>(tris.size()), 3);
  for (std::size_t t = 0; t < tris.size(); ++t)
    m.faces.row(static_cast<Eigen::Index>(t)) << tris[t][0], tris[t][1], tris[t][2];
  m.palm_center = Vec3(-0.002, 0.050, -0.013);
  m.keypoints = farthest_point_indices(m.template_vertices, keypoint_count);

  if (side == Side::kLeft) {
    m.side = Side::kLeft;
    const auto mirror_x = [](auto& mat) { mat.col(0) *= -1.0; };
    mirror_x(m.template_vertices);
    mirror_x(m.joint_rest);
    for (Eigen::Index r = 0; r < m.shape_dirs.rows(); r += 3) m.shape_dirs.row(r) *= -1.0;
    for (Eigen::Index r = 0; r < m.joint_shape_dirs.rows(); r += 3) m.joint_shape_dirs.row(r) *= -1.0;
    m.faces.col(1).swap(m.faces.col(2));
    // A reflection flips cross products, so the mirrored axes are -M a.
    m.flex_axes.col(1) *= -1.0;
    m.flex_axes.col(2) *= -1.0;
    m.palm_center.x() *= -1.0;
  }
  m.finalize();
  m.validate();
  return m;
}

/// Shared default-size models, built once.
inline const HandModel& default_hand(Side side) {
  static const HandModel left = make_hand_model(Side::kLeft);
  static const HandModel right = make_hand_model(Side::kRight);
  return side == Side::kLeft ? left : right;
}

}  // namespace hoisynth
