#pragma once

#include <array>
#include <optional>
#include <string>

#include "hoisynth/core/container.hpp"
#include "hoisynth/core/error.hpp"
#include "hoisynth/geometry/articulated.hpp"
#include "hoisynth/hand/fit.hpp"

namespace hoisynth {

inline constexpr int kSceneVersion = 1;

/// Object, its trajectory, and optionally the hand motion that goes with it
/// (index 0 = left, 1 = right). Hands live in the canonical object frame.
struct Scene {
  std::string name;
  ArticulatedObject object;
  ObjectTrajectory trajectory;
  std::optional<std::array<HandParams, 2>> hands;
  double fps = 30.0;

  std::size_t frames() const { return trajectory.size(); }

  std::vector<double> angles() const {
    std::vector<double> a;
    for (const auto& f : trajectory.frames) a.push_back(f.angle);
    return a;
  }

  void validate() const {
    trajectory.validate();
    require(fps > 0.0 && std::isfinite(fps), "scene frame rate must be positive");
    require(object.mesh().num_vertices() > 0, "scene has no object");
    if (hands) {
      for (const auto& h : *hands) {
        require(h.theta.size() == frames(), "hand motion frame count differs from the trajectory");
        h.validate();
      }
    }
  }
};

inline Container scene_container(const Scene& s) {
  s.validate();
  Container c;
  c.kind = "scene";
  c.version = kSceneVersion;
  c.meta = {{"name", s.name},
            {"frames", s.frames()},
            {"fps", s.fps},
            {"category", s.object.category()},
            {"opening_angle", s.object.opening_angle()},
            {"has_hands", s.hands.has_value()}};
  const Mesh& m = s.object.mesh();
  c.put_matrix("object_vertices", m.vertices);
  const RowMatX faces = m.faces.cast<double>();
  c.put("object_faces", DType::kI32, {faces.rows(), 3}, faces.data());
  std::vector<int> parts;
  for (Part p : m.part_ids) parts.push_back(static_cast<int>(p));
  c.put_ints("object_parts", {static_cast<std::int64_t>(parts.size())}, parts);
  RowMatX traj(static_cast<Eigen::Index>(s.frames()), 7);
  for (std::size_t i = 0; i < s.frames(); ++i)
    traj.row(static_cast<Eigen::Index>(i)) << s.trajectory.frames[i].g.transpose(), s.trajectory.frames[i].angle;
  c.put_matrix("trajectory", traj);
  if (s.hands) {
    for (Side side : {Side::kLeft, Side::kRight}) {
      const HandParams& h = (*s.hands)[static_cast<std::size_t>(side)];
      RowMatX theta(static_cast<Eigen::Index>(h.theta.size()), kPoseDim);
      for (std::size_t i = 0; i < h.theta.size(); ++i) theta.row(static_cast<Eigen::Index>(i)) = h.theta[i].transpose();
      c.put_matrix(std::string(side_name(side)) + "_theta", theta);
      c.put_matrix(std::string(side_name(side)) + "_beta", h.beta.transpose());
    }
  }
  return c;
}

inline Scene scene_from_container(const Container& c) {
  if (c.kind != "scene") throw FormatError("container holds '" + c.kind + "', expected a scene");
  if (c.version != kSceneVersion)
    throw FormatError("scene version " + std::to_string(c.version) + " is not supported (expected " +
                      std::to_string(kSceneVersion) + ")");
  Scene s;
  s.name = c.meta.value("name", "");
  s.fps = c.meta.value("fps", 30.0);
  Mesh m;
  m.vertices = c.matrix("object_vertices");
  m.faces = c.matrix("object_faces").cast<int>();
  for (int p : c.ints("object_parts")) {
    if (p != 0 && p != 1) throw FormatError("scene: part label must be 0 (top) or 1 (bottom)");
    m.part_ids.push_back(static_cast<Part>(p));
  }
  if (m.vertices.cols() != 3 || m.faces.cols() != 3) throw FormatError("scene: object arrays must be N x 3");
  s.object = ArticulatedObject(std::move(m), c.meta.value("opening_angle", 0.0), c.meta.value("category", ""));
  const RowMatX traj = c.matrix("trajectory");
  if (traj.cols() != 7) throw FormatError("scene: trajectory must be N x 7");
  const auto n = static_cast<std::size_t>(c.meta.value("frames", -1));
  if (static_cast<std::size_t>(traj.rows()) != n) throw FormatError("scene: trajectory length differs from 'frames'");
  for (Eigen::Index i = 0; i < traj.rows(); ++i) {
    FrameState f;
    f.g = traj.row(i).head<6>().transpose();
    f.angle = traj(i, 6);
    s.trajectory.frames.push_back(f);
  }
  if (c.meta.value("has_hands", false)) {
    std::array<HandParams, 2> hands;
    for (Side side : {Side::kLeft, Side::kRight}) {
      const RowMatX theta = c.matrix(std::string(side_name(side)) + "_theta");
      const RowMatX beta = c.matrix(std::string(side_name(side)) + "_beta");
      if (theta.cols() != kPoseDim || beta.size() != kShapeCount)
        throw FormatError("scene: hand arrays have the wrong width");
      HandParams& h = hands[static_cast<std::size_t>(side)];
      for (Eigen::Index i = 0; i < theta.rows(); ++i) h.theta.push_back(theta.row(i).transpose());
      h.beta = Eigen::Map<const ShapeVector>(beta.data());
    }
    s.hands = std::move(hands);
  }
  try {
    s.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("scene: ") + e.what());
  }
  return s;
}

inline void save_scene(const std::string& path, const Scene& s) { save_container(path, scene_container(s)); }

inline Scene load_scene(const std::string& path) { return scene_from_container(load_container(path, "scene")); }

}  // namespace hoisynth
