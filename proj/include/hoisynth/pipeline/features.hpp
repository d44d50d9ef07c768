#pragma once

#include <array>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>

#include "hoisynth/core/hash.hpp"
#include "hoisynth/features/cache.hpp"
#include "hoisynth/hand/model.hpp"
#include "hoisynth/pipeline/config.hpp"
#include "hoisynth/pipeline/scene.hpp"

namespace hoisynth {

inline constexpr const char* kCacheDirEnv = "HOISYNTH_CACHE_DIR";

/// Left and right hand models with `keypoints` keypoints, built once per count.
inline const std::array<HandModel, 2>& hand_models(int keypoints) {
  static std::mutex mu;
  static std::map<int, std::array<HandModel, 2>> cache;
  const std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(keypoints);
  if (it == cache.end())
    it = cache.emplace(keypoints, std::array<HandModel, 2>{make_hand_model(Side::kLeft, keypoints),
                                                           make_hand_model(Side::kRight, keypoints)}).first;
  return it->second;
}

/// Cache key of the features of a scene's object and trajectory.
inline std::string feature_cache_key(const Scene& s, BpsVariant v, int per_part, std::uint64_t seed, double margin) {
  Fnv1a h;
  const Mesh& m = s.object.mesh();
  h.add(m.vertices.data(), sizeof(double) * static_cast<std::size_t>(m.vertices.size()));
  h.add(m.faces.data(), sizeof(int) * static_cast<std::size_t>(m.faces.size()));
  for (Part p : m.part_ids) h.add(p == Part::kTop ? "t" : "b");
  const double oa = s.object.opening_angle();
  h.add(&oa, sizeof oa);
  for (const auto& f : s.trajectory.frames) {
    h.add(f.g.data(), sizeof(double) * 6);
    h.add(&f.angle, sizeof f.angle);
  }
  const auto vi = static_cast<std::uint32_t>(v);
  h.add(&vi, sizeof vi);
  h.add(&per_part, sizeof per_part);
  h.add(&seed, sizeof seed);
  h.add(&margin, sizeof margin);
  return h.hex();
}

/// Directory named by HOISYNTH_CACHE_DIR, or empty when unset.
inline std::string feature_cache_dir() {
  const char* env = std::getenv(kCacheDirEnv);
  return env && *env ? std::string(env) : std::string();
}

/// Features of a scene as stored in the cache file format. Values always pass
/// through the cache encoding so a run gives the same bits whether or not a
/// cache file existed.
inline ObjectFeatures scene_features(const Scene& s, BpsVariant v, int per_part, std::uint64_t seed, double margin,
                                     const std::string& cache_dir = feature_cache_dir()) {
  std::string path;
  if (!cache_dir.empty()) {
    path = (std::filesystem::path(cache_dir) / (feature_cache_key(s, v, per_part, seed, margin) + ".bafc")).string();
    if (std::filesystem::exists(path)) return load_feature_cache(path, s.object, s.trajectory);
  }
  const auto bytes = encode_feature_cache(compute_features(s.object, s.trajectory, v, per_part, seed, margin));
  if (!path.empty()) write_file_atomic(path, bytes);
  return decode_feature_cache(bytes, s.object, s.trajectory);
}

inline ObjectFeatures scene_features(const Scene& s, const PipelineConfig& cfg) {
  return scene_features(s, cfg.variant, cfg.basis_per_part, cfg.basis_seed, cfg.margin);
}

}  // namespace hoisynth
