#pragma once

#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/geometry/containment.hpp"
#include "hoisynth/geometry/mesh.hpp"
#include "hoisynth/geometry/nearest.hpp"
#include "hoisynth/geometry/rotation.hpp"
#include "hoisynth/geometry/transform.hpp"

namespace hoisynth {

/// One frame of the object input: global state g = [axis-angle | translation]
/// and the articulation angle in radians.
struct FrameState {
  Vec6 g = Vec6::Zero();
  double angle = 0.0;

  RigidTransform to_world() const { return RigidTransform::from_global_state(g); }
};

struct ObjectTrajectory {
  std::vector<FrameState> frames;

  std::size_t size() const { return frames.size(); }

  void validate() const {
    require(!frames.empty(), "trajectory needs at least one frame");
    for (std::size_t i = 0; i < frames.size(); ++i)
      require(frames[i].g.allFinite() && std::isfinite(frames[i].angle),
              "trajectory frame " + std::to_string(i) + " is not finite");
  }
};

/// Two-part object with a single hinge along -z through the origin of its
/// canonical frame. The top part is the one that articulates.
class ArticulatedObject {
 public:
  ArticulatedObject() = default;

  explicit ArticulatedObject(Mesh canonical, double opening_angle = std::numbers::pi, std::string category = {})
      : mesh_(std::move(canonical)), opening_angle_(opening_angle), category_(std::move(category)) {
    mesh_.validate();
    require(mesh_.part_count(Part::kTop) > 0 && mesh_.part_count(Part::kBottom) > 0,
            "articulated object needs both a top and a bottom part");
    require(std::isfinite(opening_angle_), "opening angle must be finite");
    for (Part p : {Part::kTop, Part::kBottom}) {
      auto& s = slot(p);
      s.mesh = mesh_.extract_part(p, &s.global_index);
      try {
        s.containment = std::make_shared<const MeshContainment>(s.mesh);
      } catch (const InvalidInput&) {
        s.containment.reset();
      }
    }
  }

  const Mesh& mesh() const { return mesh_; }
  double opening_angle() const { return opening_angle_; }
  const std::string& category() const { return category_; }
  const Mesh& part_mesh(Part p) const { return slot(p).mesh; }
  /// Global vertex index of each vertex of the part mesh.
  const std::vector<int>& part_indices(Part p) const { return slot(p).global_index; }
  bool watertight() const { return top_.containment && bottom_.containment; }

  /// Canonical-frame vertices with the top part articulated by `angle`.
  Points posed_canonical(double angle) const {
    require(std::isfinite(angle), "articulation angle must be finite");
    Points out = mesh_.vertices;
    const Mat3 r = articulation_rotation(angle);
    for (int i : top_.global_index) out.row(i) = (r * mesh_.vertices.row(i).transpose()).transpose();
    return out;
  }

  /// Membership of a canonical-frame point in the union of both parts.
  bool contains(const Vec3& p, double angle) const {
    require(watertight(), "object part meshes are not watertight; containment undefined");
    if (bottom_.containment->contains(p)) return true;
    const Vec3 q = articulation_rotation(angle).transpose() * p;
    return top_.containment->contains(q);
  }

  bool part_contains(Part part, const Vec3& p, double angle) const {
    require(watertight(), "object part meshes are not watertight; containment undefined");
    if (part == Part::kBottom) return bottom_.containment->contains(p);
    return top_.containment->contains(articulation_rotation(angle).transpose() * p);
  }

 private:
  struct PartSlot {
    Mesh mesh;
    std::vector<int> global_index;
    std::shared_ptr<const MeshContainment> containment;
  };
  PartSlot& slot(Part p) { return p == Part::kTop ? top_ : bottom_; }
  const PartSlot& slot(Part p) const { return p == Part::kTop ? top_ : bottom_; }

  Mesh mesh_;
  double opening_angle_ = std::numbers::pi;
  std::string category_;
  PartSlot top_;
  PartSlot bottom_;
};

/// World-frame vertices: articulate the top part about -z, then apply g.
inline Points pose_object(const ArticulatedObject& obj, const FrameState& frame) {
  require(frame.g.allFinite() && std::isfinite(frame.angle), "pose_object: frame must be finite");
  return frame.to_world().apply(obj.posed_canonical(frame.angle));
}

/// World-frame points into the object's canonical frame (inverse of g).
inline Points to_canonical(const Points& points, const FrameState& frame) {
  require(points.allFinite(), "to_canonical: points must be finite");
  return frame.to_world().apply_inverse(points);
}

inline Points to_world(const Points& points, const FrameState& frame) {
  require(points.allFinite(), "to_world: points must be finite");
  return frame.to_world().apply(points);
}

/// Canonical-frame object at a fixed articulation with query structures.
class PosedObject {
 public:
  PosedObject(const ArticulatedObject& obj, double angle)
      : obj_(&obj), angle_(angle), vertices_(obj.posed_canonical(angle)), tree_(vertices_) {
    const auto& top = obj.part_indices(Part::kTop);
    Points top_pts(static_cast<Eigen::Index>(top.size()), 3);
    for (std::size_t k = 0; k < top.size(); ++k) top_pts.row(static_cast<Eigen::Index>(k)) = vertices_.row(top[k]);
    top_tree_ = KdTree(std::move(top_pts));
  }

  double angle() const { return angle_; }
  const Points& vertices() const { return vertices_; }
  const ArticulatedObject& object() const { return *obj_; }

  /// Nearest object vertex (global index) to a canonical-frame point.
  NearestResult nearest(const Vec3& q) const { return tree_.nearest(q); }

  /// Nearest vertex of the articulated (top) part; index is global.
  NearestResult nearest_top(const Vec3& q) const {
    NearestResult r = top_tree_.nearest(q);
    r.index = obj_->part_indices(Part::kTop)[static_cast<std::size_t>(r.index)];
    return r;
  }

  bool inside(const Vec3& q) const { return obj_->contains(q, angle_); }
  bool inside_part(Part p, const Vec3& q) const { return obj_->part_contains(p, q, angle_); }

 private:
  const ArticulatedObject* obj_;
  double angle_;
  Points vertices_;
  KdTree tree_;
  KdTree top_tree_;
};

}  // namespace hoisynth
