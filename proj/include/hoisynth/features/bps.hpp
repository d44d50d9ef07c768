#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/rng.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/features/scale.hpp"
#include "hoisynth/geometry/articulated.hpp"
#include "hoisynth/geometry/nearest.hpp"

namespace hoisynth {

inline constexpr int kDefaultBasisPerPart = 512;

/// Fixed basis points inside a ball of radius `radius` (1 for the
/// normalized variants, 0.5 m for the unnormalized one).
struct BasisPointSet {
  Points points;
  std::uint64_t seed = 0;
  double radius = 1.0;

  Eigen::Index size() const { return points.rows(); }
};

/// i.i.d. uniform samples in the ball: Gaussian direction times U^(1/3).
inline BasisPointSet sample_basis_points(int count, std::uint64_t seed, double radius = 1.0) {
  require(count >= 1, "basis point count must be >= 1");
  require(radius > 0.0, "basis radius must be positive");
  Rng rng(seed);
  BasisPointSet b{Points(count, 3), seed, radius};
  for (int k = 0; k < count; ++k) {
    Vec3 dir = rng.normal3();
    double len = dir.norm();
    while (len == 0.0) {
      dir = rng.normal3();
      len = dir.norm();
    }
    const double r = radius * std::cbrt(rng.uniform());
    b.points.row(k) = (dir * (r / len)).transpose();
  }
  return b;
}

enum class BpsVariant : std::uint32_t {
  kNormalizedPart = 0,     // np-bps: K basis points mapped to each part separately
  kNormalizedAgnostic = 1, // npa-bps: 2K basis points, nearest over the whole object
  kUnnormalized = 2,       // u-bps: 2K basis points in a 0.5 m ball, metric units
};

inline const char* variant_name(BpsVariant v) {
  switch (v) {
    case BpsVariant::kNormalizedPart: return "np-bps";
    case BpsVariant::kNormalizedAgnostic: return "npa-bps";
    case BpsVariant::kUnnormalized: return "u-bps";
  }
  return "?";
}

inline BpsVariant parse_variant(const std::string& s) {
  if (s == "np-bps") return BpsVariant::kNormalizedPart;
  if (s == "npa-bps") return BpsVariant::kNormalizedAgnostic;
  if (s == "u-bps") return BpsVariant::kUnnormalized;
  throw InvalidInput("unknown BPS variant '" + s + "' (expected np-bps | npa-bps | u-bps)");
}

/// Per-frame BPS vectors plus the object vertices they land on.
///
/// `vectors` is frames x (2K*3): entry k of frame i is the feature vector of
/// basis slot k, i.e. (scaled nearest vertex) - b. For the part variant the
/// first K slots map to the top part and the last K to the bottom part.
/// `anchor_index` holds the global vertex id each slot landed on and
/// `anchors` the corresponding canonical posed vertex in metres.
struct BpsFeatures {
  BpsVariant variant = BpsVariant::kNormalizedPart;
  int slots = 0;  // 2K
  double scale = 1.0;
  RowMatX vectors;
  std::vector<std::vector<int>> anchor_index;
  std::vector<Points> anchors;

  Eigen::Index frames() const { return vectors.rows(); }
  Vec3 vector(Eigen::Index frame, int slot) const {
    return vectors.row(frame).segment<3>(3 * slot).transpose();
  }
};

namespace detail {

struct PosedCache {
  const ArticulatedObject& obj;
  std::map<double, Points> posed;

  const Points& at(double angle) {
    auto it = posed.find(angle);
    if (it == posed.end()) it = posed.emplace(angle, obj.posed_canonical(angle)).first;
    return it->second;
  }
};

inline Points gather_scaled(const Points& v, const std::vector<int>& idx, double s) {
  Points out(static_cast<Eigen::Index>(idx.size()), 3);
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = s * v.row(idx[k]);
  return out;
}

inline std::vector<int> all_indices(Eigen::Index n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = static_cast<int>(i);
  return idx;
}

// One block of slots: every basis point in `basis` mapped to the nearest of
// the vertices `subset` (scaled by s) of the posed frame.
inline void map_block(const Points& posed, const std::vector<int>& subset, double s, const Points& basis,
                      int slot0, Eigen::Index frame, BpsFeatures& out) {
  require(!subset.empty(), "BPS: part has no vertices");
  const KdTree tree(gather_scaled(posed, subset, s));
  for (Eigen::Index k = 0; k < basis.rows(); ++k) {
    const Vec3 b = basis.row(k).transpose();
    const NearestResult r = tree.nearest(b);
    const int global = subset[static_cast<std::size_t>(r.index)];
    const int slot = slot0 + static_cast<int>(k);
    out.vectors.row(frame).segment<3>(3 * slot) = (s * posed.row(global) - b.transpose());
    out.anchor_index[static_cast<std::size_t>(frame)][static_cast<std::size_t>(slot)] = global;
    out.anchors[static_cast<std::size_t>(frame)].row(slot) = posed.row(global);
  }
}

inline BpsFeatures allocate(BpsVariant v, Eigen::Index frames, int slots, double scale) {
  BpsFeatures f;
  f.variant = v;
  f.slots = slots;
  f.scale = scale;
  f.vectors.resize(frames, 3 * slots);
  f.anchor_index.assign(static_cast<std::size_t>(frames), std::vector<int>(static_cast<std::size_t>(slots)));
  f.anchors.assign(static_cast<std::size_t>(frames), Points(slots, 3));
  return f;
}

}  // namespace detail

/// Normalized part-based BPS: the same K basis points mapped to each part of
/// the scaled canonical object, layout [top | bottom].
inline BpsFeatures part_bps(const ObjectTrajectory& traj, const ArticulatedObject& obj, const BasisPointSet& basis,
                            const ObjectScale& scale) {
  traj.validate();
  require(basis.size() >= 1, "BPS: empty basis");
  require(scale.value > 0.0, "BPS: scale must be positive");
  const int k = static_cast<int>(basis.size());
  BpsFeatures out = detail::allocate(BpsVariant::kNormalizedPart, static_cast<Eigen::Index>(traj.size()), 2 * k, scale.value);
  detail::PosedCache cache{obj, {}};
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Points& posed = cache.at(traj.frames[i].angle);
    detail::map_block(posed, obj.part_indices(Part::kTop), scale.value, basis.points, 0, static_cast<Eigen::Index>(i), out);
    detail::map_block(posed, obj.part_indices(Part::kBottom), scale.value, basis.points, k, static_cast<Eigen::Index>(i), out);
  }
  return out;
}

/// Normalized part-agnostic BPS: 2K basis points, nearest over the whole object.
inline BpsFeatures part_agnostic_bps(const ObjectTrajectory& traj, const ArticulatedObject& obj,
                                     const BasisPointSet& basis, const ObjectScale& scale) {
  traj.validate();
  require(basis.size() >= 1, "BPS: empty basis");
  require(scale.value > 0.0, "BPS: scale must be positive");
  require(!obj.part_indices(Part::kTop).empty() && !obj.part_indices(Part::kBottom).empty(),
          "BPS: both parts must be non-empty");
  const int slots = static_cast<int>(basis.size());
  BpsFeatures out = detail::allocate(BpsVariant::kNormalizedAgnostic, static_cast<Eigen::Index>(traj.size()), slots, scale.value);
  const auto all = detail::all_indices(obj.mesh().vertices.rows());
  detail::PosedCache cache{obj, {}};
  for (std::size_t i = 0; i < traj.size(); ++i)
    detail::map_block(cache.at(traj.frames[i].angle), all, scale.value, basis.points, 0, static_cast<Eigen::Index>(i), out);
  return out;
}

/// Unnormalized BPS: basis in metric units (0.5 m ball), no scaling,
/// nearest over the whole object.
inline BpsFeatures unnormalized_bps(const ObjectTrajectory& traj, const ArticulatedObject& obj,
                                    const BasisPointSet& basis) {
  traj.validate();
  require(basis.size() >= 1, "BPS: empty basis");
  const int slots = static_cast<int>(basis.size());
  BpsFeatures out = detail::allocate(BpsVariant::kUnnormalized, static_cast<Eigen::Index>(traj.size()), slots, 1.0);
  const auto all = detail::all_indices(obj.mesh().vertices.rows());
  detail::PosedCache cache{obj, {}};
  for (std::size_t i = 0; i < traj.size(); ++i)
    detail::map_block(cache.at(traj.frames[i].angle), all, 1.0, basis.points, 0, static_cast<Eigen::Index>(i), out);
  return out;
}

/// N x 6 per-frame global states: translation relative to the first frame,
/// then the axis-angle rotation.
struct GlobalStates {
  RowMatX values;
};

inline GlobalStates global_states(const ObjectTrajectory& traj) {
  traj.validate();
  GlobalStates out{RowMatX(static_cast<Eigen::Index>(traj.size()), 6)};
  const Vec3 t0 = traj.frames.front().g.tail<3>();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& g = traj.frames[i].g;
    out.values.row(static_cast<Eigen::Index>(i)) << (g.tail<3>() - t0).transpose(), g.head<3>().transpose();
  }
  return out;
}

/// Basis sets for a feature variant with K points per part.
inline BasisPointSet basis_for_variant(BpsVariant v, int per_part, std::uint64_t seed) {
  switch (v) {
    case BpsVariant::kNormalizedPart: return sample_basis_points(per_part, seed, 1.0);
    case BpsVariant::kNormalizedAgnostic: return sample_basis_points(2 * per_part, seed, 1.0);
    case BpsVariant::kUnnormalized: return sample_basis_points(2 * per_part, seed, 0.5);
  }
  throw InvalidInput("unknown BPS variant");
}

inline BpsFeatures compute_bps(BpsVariant v, const ObjectTrajectory& traj, const ArticulatedObject& obj,
                               const BasisPointSet& basis, const ObjectScale& scale) {
  switch (v) {
    case BpsVariant::kNormalizedPart: return part_bps(traj, obj, basis, scale);
    case BpsVariant::kNormalizedAgnostic: return part_agnostic_bps(traj, obj, basis, scale);
    case BpsVariant::kUnnormalized: return unnormalized_bps(traj, obj, basis);
  }
  throw InvalidInput("unknown BPS variant");
}

}  // namespace hoisynth
