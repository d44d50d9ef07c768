#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hoisynth/contact/contact_map.hpp"
#include "hoisynth/core/container.hpp"
#include "hoisynth/diffusion/guidance.hpp"
#include "hoisynth/hand/fit.hpp"
#include "hoisynth/hand/keypoints.hpp"
#include "hoisynth/metrics/metrics.hpp"
#include "hoisynth/pipeline/features.hpp"

namespace hoisynth {

inline constexpr int kMotionVersion = 1;

/// One sampled bimanual motion: the network outputs (H, D and the contact
/// map it was conditioned on) and the hand parameters fitted to them.
/// Index 0 = left, 1 = right throughout.
struct MotionSample {
  std::uint64_t seed = 0;
  std::array<HandParams, 2> hands;
  std::array<std::vector<Points>, 2> keypoints;
  std::array<std::vector<Points>, 2> directions;
  std::optional<std::array<ContactFrames, 2>> contact;
  bool refined = false;
  nlohmann::json refine_summary;  // null unless refined

  std::size_t frames() const { return hands[0].theta.size(); }
};

struct MotionSet {
  std::string scene;
  int keypoints = 0;
  std::vector<MotionSample> samples;

  std::size_t frames() const { return samples.empty() ? 0 : samples.front().frames(); }

  void validate() const {
    require(!samples.empty(), "motion set is empty");
    require(keypoints >= 1, "motion set needs a keypoint count");
    for (const auto& s : samples) {
      for (std::size_t h = 0; h < 2; ++h) {
        require(s.hands[h].theta.size() == frames(), "motion samples differ in frame count");
        require(s.keypoints[h].size() == frames() && s.directions[h].size() == frames(),
                "motion sample tracks differ in length");
        s.hands[h].validate();
      }
      if (s.contact)
        for (const auto& c : *s.contact) require(c.size() == frames(), "contact map length differs from the motion");
    }
  }
};

/// Dense hand surfaces of a sample, canonical object frame.
inline SurfaceMotion sample_surfaces(const MotionSample& s, const std::array<HandModel, 2>& models) {
  SurfaceMotion m;
  for (std::size_t h = 0; h < 2; ++h) {
    std::vector<Points> frames;
    for (const auto& t : s.hands[h].theta) frames.push_back(lbs_forward(models[h], t, s.hands[h].beta));
    m.hands.push_back(std::move(frames));
  }
  return m;
}

namespace detail {

inline RowMatX stack_points(const std::vector<Points>& pts) {
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  const Eigen::Index w = n ? pts.front().size() : 0;
  RowMatX out(n, w);
  pack_points(out, 0, pts);
  return out;
}

inline std::vector<Points> unstack_points(const RowMatX& m, const std::string& name) {
  if (m.cols() % 3 != 0) throw FormatError("motion array '" + name + "' width is not a multiple of 3");
  return unpack_points(m, 0, m.cols() / 3);
}

}  // namespace detail

inline Container motion_container(const MotionSet& set) {
  set.validate();
  Container c;
  c.kind = "motion";
  c.version = kMotionVersion;
  c.meta["scene"] = set.scene;
  c.meta["keypoints"] = set.keypoints;
  c.meta["frames"] = set.frames();
  c.meta["samples"] = nlohmann::json::array();
  for (std::size_t k = 0; k < set.samples.size(); ++k) {
    const MotionSample& s = set.samples[k];
    const std::string p = "s" + std::to_string(k) + ".";
    c.meta["samples"].push_back({{"seed", s.seed},
                                 {"refined", s.refined},
                                 {"has_contact", s.contact.has_value()},
                                 {"refine", s.refine_summary}});
    for (Side side : {Side::kLeft, Side::kRight}) {
      const auto h = static_cast<std::size_t>(side);
      const std::string q = p + side_name(side) + "_";
      RowMatX theta(static_cast<Eigen::Index>(s.frames()), kPoseDim);
      for (std::size_t i = 0; i < s.frames(); ++i) theta.row(static_cast<Eigen::Index>(i)) = s.hands[h].theta[i].transpose();
      c.put_matrix(q + "theta", theta);
      c.put_matrix(q + "beta", s.hands[h].beta.transpose());
      c.put_matrix(q + "keypoints", detail::stack_points(s.keypoints[h]));
      c.put_matrix(q + "directions", detail::stack_points(s.directions[h]));
      if (s.contact) c.put_matrix(q + "contact", detail::stack_points((*s.contact)[h]));
    }
  }
  return c;
}

inline MotionSet motion_from_container(const Container& c) {
  if (c.kind != "motion") throw FormatError("container holds '" + c.kind + "', expected a motion");
  if (c.version != kMotionVersion)
    throw FormatError("motion version " + std::to_string(c.version) + " is not supported (expected " +
                      std::to_string(kMotionVersion) + ")");
  MotionSet set;
  try {
    set.scene = c.meta.at("scene").get<std::string>();
    set.keypoints = c.meta.at("keypoints").get<int>();
    const auto& samples = c.meta.at("samples");
    for (std::size_t k = 0; k < samples.size(); ++k) {
      MotionSample s;
      s.seed = samples[k].at("seed").get<std::uint64_t>();
      s.refined = samples[k].at("refined").get<bool>();
      s.refine_summary = samples[k].value("refine", nlohmann::json());
      const bool has_contact = samples[k].at("has_contact").get<bool>();
      if (has_contact) s.contact.emplace();
      const std::string p = "s" + std::to_string(k) + ".";
      for (Side side : {Side::kLeft, Side::kRight}) {
        const auto h = static_cast<std::size_t>(side);
        const std::string q = p + side_name(side) + "_";
        const RowMatX theta = c.matrix(q + "theta");
        const RowMatX beta = c.matrix(q + "beta");
        if (theta.cols() != kPoseDim || beta.size() != kShapeCount)
          throw FormatError("motion: hand arrays have the wrong width");
        for (Eigen::Index i = 0; i < theta.rows(); ++i) s.hands[h].theta.push_back(theta.row(i).transpose());
        s.hands[h].beta = Eigen::Map<const ShapeVector>(beta.data());
        s.keypoints[h] = detail::unstack_points(c.matrix(q + "keypoints"), q + "keypoints");
        s.directions[h] = detail::unstack_points(c.matrix(q + "directions"), q + "directions");
        if (has_contact) (*s.contact)[h] = detail::unstack_points(c.matrix(q + "contact"), q + "contact");
      }
      set.samples.push_back(std::move(s));
    }
    set.validate();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("motion header is incomplete: ") + e.what());
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("motion: ") + e.what());
  }
  return set;
}

inline void save_motion(const std::string& path, const MotionSet& set) { save_container(path, motion_container(set)); }

inline MotionSet load_motion(const std::string& path) { return motion_from_container(load_container(path, "motion")); }

}  // namespace hoisynth
