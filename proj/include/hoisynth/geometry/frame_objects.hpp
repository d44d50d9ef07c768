#pragma once

#include <map>
#include <memory>
#include <vector>

#include "hoisynth/core/error.hpp"
#include "hoisynth/geometry/articulated.hpp"

namespace hoisynth {

/// Object posed at every frame's articulation angle, canonical frame.
/// Frames with bitwise-equal angles share one query structure.
class FrameObjects {
 public:
  FrameObjects(const ArticulatedObject& obj, const std::vector<double>& angles) {
    require(obj.watertight(), "per-frame object queries need a watertight object");
    std::map<double, std::shared_ptr<const PosedObject>> cache;
    for (double a : angles) {
      auto& slot = cache[a];
      if (!slot) slot = std::make_shared<const PosedObject>(obj, a);
      frames_.push_back(slot);
    }
  }

  FrameObjects(const ArticulatedObject& obj, const ObjectTrajectory& traj)
      : FrameObjects(obj, angles_of(traj)) {}

  std::size_t size() const { return frames_.size(); }
  const PosedObject& operator[](std::size_t i) const { return *frames_.at(i); }

 private:
  static std::vector<double> angles_of(const ObjectTrajectory& traj) {
    std::vector<double> a;
    for (const auto& f : traj.frames) a.push_back(f.angle);
    return a;
  }
  std::vector<std::shared_ptr<const PosedObject>> frames_;
};

}  // namespace hoisynth
