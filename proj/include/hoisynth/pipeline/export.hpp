#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoisynth/core/container.hpp"
#include "hoisynth/geometry/articulated.hpp"
#include "hoisynth/geometry/obj_io.hpp"
#include "hoisynth/metrics/metrics.hpp"
#include "hoisynth/pipeline/motion.hpp"

namespace hoisynth {

inline constexpr int kExportVersion = 1;

inline std::string frame_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu.obj", i);
  return buf;
}

/// One world-frame OBJ per frame (groups "top", "bottom", then one per hand)
/// plus index.json listing the files. Returns the index.
inline nlohmann::json export_sequence(const SurfaceMotion& motion, const std::vector<Faces>& hand_faces,
                                      const std::vector<std::string>& hand_names, const ArticulatedObject& obj,
                                      const ObjectTrajectory& traj, const std::string& dir, double fps = kDefaultFps) {
  if (motion.hands.empty() || motion.frames() == 0) throw InvalidInput("nothing to export: motion is empty");
  motion.validate();
  require(motion.frames() == traj.size(), "motion has " + std::to_string(motion.frames()) +
                                              " frames but the trajectory has " + std::to_string(traj.size()));
  require(hand_faces.size() == motion.hands.size() && hand_names.size() == motion.hands.size(),
          "one face set and name per hand required");
  std::filesystem::create_directories(dir);
  nlohmann::json index = {{"version", kExportVersion}, {"frames", motion.frames()}, {"fps", fps},
                          {"frame", "world"}, {"groups", nlohmann::json::array({"top", "bottom"})},
                          {"files", nlohmann::json::array()}};
  for (const auto& n : hand_names) index["groups"].push_back(n);
  for (std::size_t i = 0; i < motion.frames(); ++i) {
    const FrameState& f = traj.frames[i];
    const Points world = pose_object(obj, f);
    std::vector<ObjGroup> groups;
    for (Part p : {Part::kTop, Part::kBottom}) {
      const auto& idx = obj.part_indices(p);
      Points v(static_cast<Eigen::Index>(idx.size()), 3);
      for (std::size_t k = 0; k < idx.size(); ++k) v.row(static_cast<Eigen::Index>(k)) = world.row(idx[k]);
      groups.push_back({part_name(p), std::move(v), obj.part_mesh(p).faces});
    }
    for (std::size_t h = 0; h < motion.hands.size(); ++h)
      groups.push_back({hand_names[h], to_world(motion.hands[h][i], f), hand_faces[h]});
    std::ostringstream os;
    write_obj(os, groups);
    const std::string name = frame_file_name(i);
    write_text_atomic((std::filesystem::path(dir) / name).string(), os.str());
    index["files"].push_back(name);
  }
  write_text_atomic((std::filesystem::path(dir) / "index.json").string(), index.dump(2) + "\n");
  return index;
}

inline nlohmann::json export_sequence(const MotionSample& sample, const std::array<HandModel, 2>& models,
                                      const Scene& scene, const std::string& dir) {
  if (sample.frames() == 0) throw InvalidInput("nothing to export: motion is empty");
  return export_sequence(sample_surfaces(sample, models), {models[0].faces, models[1].faces},
                         {"left_hand", "right_hand"}, scene.object, scene.trajectory, dir, scene.fps);
}

struct ImportedSequence {
  nlohmann::json index;
  std::vector<std::vector<ObjGroup>> frames;
};

inline ImportedSequence import_sequence(const std::string& dir) {
  const std::filesystem::path root(dir);
  std::ifstream in(root / "index.json");
  if (!in) throw FormatError("'" + dir + "' has no index.json");
  ImportedSequence out;
  try {
    out.index = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("index.json is not valid JSON: ") + e.what());
  }
  if (out.index.value("version", 0) != kExportVersion) throw FormatError("unsupported export version");
  for (const auto& f : out.index.at("files")) {
    std::ifstream obj(root / f.get<std::string>());
    if (!obj) throw FormatError("missing exported frame '" + f.get<std::string>() + "'");
    out.frames.push_back(read_obj_groups(obj));
  }
  if (out.frames.size() != out.index.at("frames").get<std::size_t>())
    throw FormatError("index.json frame count differs from its file list");
  return out;
}

}  // namespace hoisynth
