#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/rng.hpp"
#include "hoisynth/geometry/articulated.hpp"
#include "hoisynth/geometry/frame_objects.hpp"
#include "hoisynth/geometry/primitives.hpp"
#include "hoisynth/hand/fit.hpp"
#include "hoisynth/hand/lbs.hpp"
#include "hoisynth/hand/model.hpp"
#include "hoisynth/pipeline/scene.hpp"

namespace hoisynth {

enum class ObjectFamily { kBox, kCylinder, kScissors };

inline const char* family_name(ObjectFamily f) {
  switch (f) {
    case ObjectFamily::kBox: return "box";
    case ObjectFamily::kCylinder: return "cylinder";
    case ObjectFamily::kScissors: return "scissors";
  }
  return "?";
}

inline ObjectFamily parse_family(const std::string& s) {
  if (s == "box") return ObjectFamily::kBox;
  if (s == "cylinder") return ObjectFamily::kCylinder;
  if (s == "scissors") return ObjectFamily::kScissors;
  throw InvalidInput("unknown object family '" + s + "' (expected box, cylinder or scissors)");
}

/// Closed-state opening angle per family, stored in the object metadata.
inline double family_opening_angle(ObjectFamily f) {
  switch (f) {
    case ObjectFamily::kBox: return std::numbers::pi / 2;
    case ObjectFamily::kCylinder: return 0.0;
    case ObjectFamily::kScissors: return std::numbers::pi;
  }
  return 0.0;
}

enum class SegmentKind { kLift, kRotate, kArticulate };

inline SegmentKind parse_segment(const std::string& s) {
  if (s == "lift") return SegmentKind::kLift;
  if (s == "rotate") return SegmentKind::kRotate;
  if (s == "articulate") return SegmentKind::kArticulate;
  throw InvalidInput("unknown trajectory segment '" + s + "' (expected lift, rotate or articulate)");
}

struct SyntheticSpec {
  ObjectFamily family = ObjectFamily::kBox;
  double size_min = 0.9;  // uniform scale factor range on the family's base dimensions
  double size_max = 1.1;
  int frames = 32;
  double fps = 30.0;
  /// Trajectory program. Empty: `segments` random segments, at least one of
  /// which articulates.
  std::vector<SegmentKind> program;
  int segments = 3;
  bool hands = true;
  double spacing = 0.005;  // object mesh vertex spacing, metres
  std::uint64_t seed = 0;

  void validate() const {
    require(std::isfinite(size_min) && std::isfinite(size_max) && size_min > 0.0 && size_max >= size_min,
            "synthetic size range must be positive and ordered");
    require(frames >= 1, "synthetic scene needs at least one frame");
    require(fps > 0.0, "frame rate must be positive");
    require(spacing > 0.0 && spacing <= 0.005, "object spacing must be in (0, 5 mm]");
    require(!program.empty() || segments >= 1, "trajectory program needs at least one segment");
  }
};

namespace detail {

inline constexpr double kHingeGap = 0.004;
inline constexpr double kHandGap = 0.002;

/// Where one hand rests at articulation 0: palm centre over `point`, palm
/// facing along -normal, fingers along `fingers`.
struct GraspSite {
  Part part = Part::kBottom;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 fingers = Vec3::UnitY();
};

struct SyntheticObject {
  ArticulatedObject object;
  std::array<GraspSite, 2> sites;  // left, right
  double max_angle = 0.0;
};

inline Vec3 planar(double angle) { return {std::cos(angle), std::sin(angle), 0.0}; }

inline SyntheticObject build_object(ObjectFamily family, double s, double spacing, Rng& rng) {
  SyntheticObject out;
  const double g = kHingeGap;
  Mesh mesh;
  switch (family) {
    case ObjectFamily::kBox: {
      // Two blocks pivoting about a corner; the top block swings away from
      // the bottom one for angles in [0, pi/2].
      const double w = 0.14 * s, l = 0.17 * s, h = 0.05 * s, wt = 0.12 * s, lt = 0.11 * s;
      mesh = merge_meshes({make_box(Vec3(0, -lt, -h), Vec3(wt, -g, 0), spacing, Part::kTop),
                           make_box(Vec3(0, g, -h), Vec3(w, l, 0), spacing, Part::kBottom)});
      out.sites[0] = {Part::kBottom, Vec3(w / 2, g + l / 2, 0), Vec3::UnitZ(), Vec3::UnitY()};
      out.sites[1] = {Part::kTop, Vec3(wt / 2, -g - lt / 2, 0), Vec3::UnitZ(), -Vec3::UnitY()};
      out.max_angle = std::numbers::pi / 2;
      break;
    }
    case ObjectFamily::kCylinder: {
      // Small cap twisting on a wide base.
      const double r_base = 0.12 * s, h = 0.08 * s, r_cap = 0.035 * s, hc = 0.03 * s;
      mesh = merge_meshes({make_cylinder(r_cap, g, g + hc, spacing, Part::kTop),
                           make_cylinder(r_base, -h, 0.0, spacing, Part::kBottom)});
      const Vec3 u = planar(rng.uniform(0.0, 2.0 * std::numbers::pi));
      out.sites[0] = {Part::kBottom, u * (r_cap + 0.065 * s), Vec3::UnitZ(), u};
      out.sites[1] = {Part::kTop, Vec3(0, 0, g + hc), Vec3::UnitZ(),
                      planar(rng.uniform(0.0, 2.0 * std::numbers::pi))};
      out.max_angle = std::numbers::pi;
      break;
    }
    case ObjectFamily::kScissors: {
      // Stacked bars crossing at the pivot; the left hand holds the lower
      // bar from below.
      const double hw = 0.0175 * s, y0 = -0.05 * s, y1 = 0.17 * s, hb = 0.012 * s;
      mesh = merge_meshes({make_box(Vec3(-hw, y0, g), Vec3(hw, y1, g + hb), spacing, Part::kTop),
                           make_box(Vec3(-hw, y0, -hb), Vec3(hw, y1, 0), spacing, Part::kBottom)});
      out.sites[0] = {Part::kBottom, Vec3(0, 0.08 * s, -hb), -Vec3::UnitZ(), Vec3::UnitY()};
      out.sites[1] = {Part::kTop, Vec3(0, 0.08 * s, g + hb), Vec3::UnitZ(), Vec3::UnitY()};
      out.max_angle = 0.8;
      break;
    }
  }
  out.object = ArticulatedObject(std::move(mesh), family_opening_angle(family), family_name(family));
  return out;
}

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

inline ObjectTrajectory build_trajectory(const SyntheticSpec& spec, double max_angle, Rng& rng) {
  std::vector<SegmentKind> program = spec.program;
  if (program.empty()) {
    for (int k = 0; k < spec.segments; ++k) program.push_back(static_cast<SegmentKind>(rng.uniform_int(0, 2)));
    program[program.size() / 2] = SegmentKind::kArticulate;
  }
  Vec3 t(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), 0.0);
  Mat3 r = axis_angle_to_matrix<double>(Vec3(0, 0, rng.uniform(-std::numbers::pi, std::numbers::pi)));
  double a = rng.uniform(0.0, 0.2) * max_angle;

  ObjectTrajectory traj;
  const auto n = static_cast<std::size_t>(spec.frames);
  const std::size_t segs = program.size();
  for (std::size_t k = 0; k < segs; ++k) {
    const std::size_t begin = k * n / segs, end = (k + 1) * n / segs;
    Vec3 t1 = t;
    Mat3 dr = Mat3::Identity();
    Vec3 w = Vec3::Zero();
    double a1 = a;
    switch (program[k]) {
      case SegmentKind::kLift:
        t1 += Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.05, 0.15));
        break;
      case SegmentKind::kRotate: {
        Vec3 axis = rng.normal3();
        w = axis.normalized() * rng.uniform(0.3, 0.8);
        break;
      }
      case SegmentKind::kArticulate:
        a1 = a > max_angle / 2 ? rng.uniform(0.0, 0.3) * max_angle : rng.uniform(0.7, 1.0) * max_angle;
        break;
    }
    for (std::size_t i = begin; i < end; ++i) {
      const double u = smoothstep(end - begin > 1 ? double(i - begin + 1) / double(end - begin) : 1.0);
      dr = axis_angle_to_matrix<double>(Vec3(u * w));
      FrameState f;
      f.g.head<3>() = matrix_to_axis_angle(dr * r);
      f.g.tail<3>() = t + u * (t1 - t);
      f.angle = a + u * (a1 - a);
      traj.frames.push_back(f);
    }
    r = axis_angle_to_matrix<double>(w) * r;
    t = t1;
    a = a1;
  }
  return traj;
}

/// Rotation taking the rest hand (fingers +y, palm facing -z) onto a site.
inline Mat3 site_frame(const Vec3& fingers, const Vec3& normal) {
  Mat3 r;
  r.col(0) = fingers.cross(normal);
  r.col(1) = fingers;
  r.col(2) = normal;
  return r;
}

/// Hand motion resting on one grasp site and following its part.
inline HandParams place_hand(const HandModel& model, const GraspSite& site, const ObjectTrajectory& traj,
                             const FrameObjects& posed, Rng& rng) {
  HandParams hp;
  for (int k = 0; k < kShapeCount; ++k) hp.beta(k) = rng.normal(0.0, 0.3);
  const Vec3 j0 = compute_bones<double>(model, PoseVector::Zero(), hp.beta).joint[0];

  const double yaw = rng.uniform(-0.3, 0.3);
  const Vec3 fingers = axis_angle_to_matrix<double>(Vec3(site.normal * yaw)) * site.fingers;
  const Mat3 r0 = site_frame(fingers, site.normal);
  const Vec3 e1 = r0.col(0), e2 = r0.col(1);
  const double drift = 0.004, phase1 = rng.uniform(0.0, 6.3), phase2 = rng.uniform(0.0, 6.3);
  std::array<double, kJointCount> flex_phase{};
  for (auto& p : flex_phase) p = rng.uniform(0.0, 6.3);
  const double spread = rng.uniform(-0.1, 0.1);

  const auto n = traj.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n > 1 ? double(i) / double(n - 1) : 0.0;
    PoseVector local = PoseVector::Zero();
    for (int k = 1; k < kJointCount; ++k) {
      const Vec3 axis = model.flex_axes.row(k).transpose();
      const double flex = 0.03 * std::sin(2.0 * std::numbers::pi * t + flex_phase[static_cast<std::size_t>(k)]);
      local.segment<3>(6 + 3 * (k - 1)) = axis * flex;
      if ((k - 1) % 3 == 0) local.segment<3>(6 + 3 * (k - 1)) += model.palm_normal * (spread * ((k - 1) / 3 - 2) / 2.0);
    }
    const Points rest = lbs_forward(model, local, hp.beta);
    const Vec3 target = site.point + drift * (std::sin(2.0 * std::numbers::pi * t + phase1) * e1 +
                                              std::sin(2.0 * std::numbers::pi * t + phase2) * e2);
    Vec3 trans = target - (r0 * (model.palm_center - j0) + j0);
    double lowest = std::numeric_limits<double>::infinity();
    // Seat the palm; fingers and thumb hanging past an edge do not count.
    for (Eigen::Index v = 0; v < rest.rows(); ++v) {
      if (model.weights(v, 0) != 1.0) continue;
      const Vec3 x = r0 * (rest.row(v).transpose() - j0) + j0 + trans;
      lowest = std::min(lowest, site.normal.dot(x - site.point));
    }
    trans += site.normal * (kHandGap - lowest);

    const Mat3 ra = site.part == Part::kTop ? articulation_rotation(traj.frames[i].angle) : Mat3::Identity();
    const Vec3 lift_dir = ra * site.normal;
    PoseVector theta = local;
    theta.segment<3>(3) = matrix_to_axis_angle(ra * r0);
    theta.head<3>() = ra * (j0 + trans) - j0;
    // Push clear of any part the hand swings into.
    for (int attempt = 0;; ++attempt) {
      const Points v = lbs_forward(model, theta, hp.beta);
      bool inside = false;
      for (Eigen::Index k = 0; k < v.rows() && !inside; ++k) inside = posed[i].inside(v.row(k).transpose());
      if (!inside) break;
      require(attempt < 50, "grasp heuristic could not place the hand without penetration");
      theta.head<3>() += 0.001 * lift_dir;
    }
    hp.theta.push_back(theta);
  }
  return hp;
}

}  // namespace detail

/// Procedural two-part object, object trajectory and (optionally) a pair of
/// hands resting on the two parts. Left hand on the bottom part, right hand
/// on the top part. Same spec and seed give the same scene.
inline Scene gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const double s = spec.size_min == spec.size_max ? spec.size_min : rng.uniform(spec.size_min, spec.size_max);
  detail::SyntheticObject so = detail::build_object(spec.family, s, spec.spacing, rng);
  Scene scene;
  scene.name = std::string(family_name(spec.family)) + "-" + std::to_string(spec.seed);
  scene.fps = spec.fps;
  scene.trajectory = detail::build_trajectory(spec, so.max_angle, rng);
  scene.object = std::move(so.object);
  if (spec.hands) {
    const FrameObjects posed(scene.object, scene.trajectory);
    std::array<HandParams, 2> hands;
    for (Side side : {Side::kLeft, Side::kRight}) {
      const auto k = static_cast<std::size_t>(side);
      hands[k] = detail::place_hand(default_hand(side), so.sites[k], scene.trajectory, posed, rng);
    }
    scene.hands = std::move(hands);
  }
  scene.validate();
  return scene;
}

}  // namespace hoisynth
