#pragma once

// Feature cache file. All fields little-endian, no padding:
//
//   offset  size          field
//   0       4             magic "BAFC"
//   4       4   u32       version (= 1)
//   8       4   u32       layout: 0 np-bps [top K | bottom K], 1 npa-bps, 2 u-bps
//   12      4   u32       K, basis points per part (2K slots per frame)
//   16      8   u64       N, frames
//   24      8   u64       basis seed
//   32      8   f64       s_o
//   40      N*2K*3*4 f32  O, frame-major, slot-major, xyz
//   ...     N*6*4    f32  G, per frame [relative translation | axis-angle]
//   ...     N*2K*4   i32  anchor vertex index per slot
//
// Anchors are rebuilt from the indices and the object posed at each frame.

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "hoisynth/core/container.hpp"
#include "hoisynth/core/error.hpp"
#include "hoisynth/features/bps.hpp"

namespace hoisynth {

inline constexpr char kFeatureCacheMagic[4] = {'B', 'A', 'F', 'C'};
inline constexpr std::uint32_t kFeatureCacheVersion = 1;

/// Everything the conditioning of one trajectory needs.
struct ObjectFeatures {
  BpsFeatures bps;
  GlobalStates global;
  std::uint64_t basis_seed = 0;
  int per_part = 0;  // K

  /// N x (6K + 6): BPS vectors then global state, per frame.
  RowMatX conditioning() const {
    RowMatX out(bps.frames(), bps.vectors.cols() + 6);
    out << bps.vectors, global.values;
    return out;
  }
};

inline ObjectFeatures compute_features(const ArticulatedObject& obj, const ObjectTrajectory& traj, BpsVariant v,
                                       int per_part, std::uint64_t basis_seed, double margin = kDefaultMargin) {
  require(per_part >= 1, "BPS needs at least one basis point per part");
  ObjectFeatures f;
  f.per_part = per_part;
  f.basis_seed = basis_seed;
  const BasisPointSet basis = basis_for_variant(v, per_part, basis_seed);
  f.bps = compute_bps(v, traj, obj, basis, compute_scale(obj, margin));
  f.global = global_states(traj);
  return f;
}

namespace detail {

template <typename T>
void put_le(std::vector<unsigned char>& out, T v) {
  v = to_little(v);
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get_le(const std::vector<unsigned char>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw FormatError("feature cache is truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return to_little(v);
}

}  // namespace detail

inline std::vector<unsigned char> encode_feature_cache(const ObjectFeatures& f) {
  const auto n = static_cast<std::uint64_t>(f.bps.frames());
  const int slots = f.bps.slots;
  require(slots == 2 * f.per_part, "feature cache expects 2K slots");
  std::vector<unsigned char> out(kFeatureCacheMagic, kFeatureCacheMagic + 4);
  detail::put_le<std::uint32_t>(out, kFeatureCacheVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.bps.variant));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.per_part));
  detail::put_le<std::uint64_t>(out, n);
  detail::put_le<std::uint64_t>(out, f.basis_seed);
  detail::put_le<double>(out, f.bps.scale);
  for (Eigen::Index i = 0; i < f.bps.vectors.rows(); ++i)
    for (Eigen::Index c = 0; c < f.bps.vectors.cols(); ++c)
      detail::put_le<float>(out, static_cast<float>(f.bps.vectors(i, c)));
  for (Eigen::Index i = 0; i < f.global.values.rows(); ++i)
    for (int c = 0; c < 6; ++c) detail::put_le<float>(out, static_cast<float>(f.global.values(i, c)));
  for (const auto& row : f.bps.anchor_index)
    for (int idx : row) detail::put_le<std::int32_t>(out, idx);
  return out;
}

/// Decodes a cache and rebuilds the anchors against `obj` and `traj`.
inline ObjectFeatures decode_feature_cache(const std::vector<unsigned char>& buf, const ArticulatedObject& obj,
                                           const ObjectTrajectory& traj) {
  if (buf.size() < 40 || std::memcmp(buf.data(), kFeatureCacheMagic, 4) != 0)
    throw FormatError("not a feature cache (bad magic)");
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint32_t>(buf, pos);
  if (version != kFeatureCacheVersion) throw FormatError("unsupported feature cache version " + std::to_string(version));
  const auto layout = detail::get_le<std::uint32_t>(buf, pos);
  if (layout > 2) throw FormatError("feature cache has unknown layout " + std::to_string(layout));
  const auto k = detail::get_le<std::uint32_t>(buf, pos);
  const auto n = detail::get_le<std::uint64_t>(buf, pos);
  ObjectFeatures f;
  f.basis_seed = detail::get_le<std::uint64_t>(buf, pos);
  f.per_part = static_cast<int>(k);
  const double scale = detail::get_le<double>(buf, pos);
  if (n != traj.size()) throw FormatError("feature cache frame count differs from the trajectory");
  const int slots = 2 * static_cast<int>(k);
  const std::size_t expected = 40 + n * static_cast<std::size_t>(slots) * 16 + n * 24;
  if (buf.size() != expected) throw FormatError("feature cache size does not match its header");
  f.bps = detail::allocate(static_cast<BpsVariant>(layout), static_cast<Eigen::Index>(n), slots, scale);
  for (Eigen::Index i = 0; i < f.bps.vectors.rows(); ++i)
    for (Eigen::Index c = 0; c < f.bps.vectors.cols(); ++c) f.bps.vectors(i, c) = detail::get_le<float>(buf, pos);
  f.global.values.resize(static_cast<Eigen::Index>(n), 6);
  for (Eigen::Index i = 0; i < f.global.values.rows(); ++i)
    for (int c = 0; c < 6; ++c) f.global.values(i, c) = detail::get_le<float>(buf, pos);
  const Eigen::Index nv = obj.mesh().num_vertices();
  for (std::size_t i = 0; i < n; ++i) {
    const Points posed = obj.posed_canonical(traj.frames[i].angle);
    for (int s = 0; s < slots; ++s) {
      const int idx = detail::get_le<std::int32_t>(buf, pos);
      if (idx < 0 || idx >= nv) throw FormatError("feature cache anchor index out of range");
      f.bps.anchor_index[i][static_cast<std::size_t>(s)] = idx;
      f.bps.anchors[i].row(s) = posed.row(idx);
    }
  }
  return f;
}

inline void save_feature_cache(const std::string& path, const ObjectFeatures& f) {
  write_file_atomic(path, encode_feature_cache(f));
}

inline ObjectFeatures load_feature_cache(const std::string& path, const ArticulatedObject& obj,
                                         const ObjectTrajectory& traj) {
  return decode_feature_cache(read_file(path), obj, traj);
}

}  // namespace hoisynth
