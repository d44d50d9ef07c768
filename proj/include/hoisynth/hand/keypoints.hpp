#pragma once

#include <array>
#include <vector>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/geometry/nearest.hpp"
#include "hoisynth/hand/model.hpp"

namespace hoisynth {

/// Gather rows `indices` of a vertex set.
inline Points gather_rows(const Points& vertices, const std::vector<int>& indices) {
  Points out(static_cast<Eigen::Index>(indices.size()), 3);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int i = indices[r];
    if (i < 0 || i >= vertices.rows()) throw InvalidInput("keypoint index out of range");
    out.row(static_cast<Eigen::Index>(r)) = vertices.row(i);
  }
  return out;
}

inline Points sample_keypoints(const HandModel& model, const Points& vertices) {
  return gather_rows(vertices, model.keypoints);
}

/// D[j] = nearest object vertex minus H[j].
inline Points direction_vectors(const Points& keypoints, const KdTree& object) {
  Points out(keypoints.rows(), 3);
  for (Eigen::Index j = 0; j < keypoints.rows(); ++j)
    out.row(j) = object.nearest(keypoints.row(j).transpose()).vector.transpose();
  return out;
}

inline Points direction_vectors(const Points& keypoints, const Points& object_vertices) {
  if (object_vertices.rows() == 0) throw InvalidInput("object vertex set is empty");
  return direction_vectors(keypoints, KdTree(object_vertices));
}

/// Keypoints and direction vectors for one hand over a sequence, canonical
/// object frame.
struct HandTrack {
  std::vector<Points> keypoints;   // N x (J x 3)
  std::vector<Points> directions;  // N x (J x 3)

  Eigen::Index frames() const { return static_cast<Eigen::Index>(keypoints.size()); }

  void validate() const {
    require(keypoints.size() == directions.size(), "keypoint and direction tracks differ in length");
    for (std::size_t i = 0; i < keypoints.size(); ++i) {
      require(keypoints[i].rows() == keypoints[0].rows(), "keypoint count changes over the sequence");
      require(directions[i].rows() == keypoints[i].rows(), "direction count differs from keypoint count");
      require(all_finite(keypoints[i]) && all_finite(directions[i]), "hand track must be finite");
    }
  }
};

/// Index 0 = left, 1 = right.
struct HandMotion {
  std::array<HandTrack, 2> hands;

  HandTrack& hand(Side s) { return hands[static_cast<std::size_t>(s)]; }
  const HandTrack& hand(Side s) const { return hands[static_cast<std::size_t>(s)]; }
  Eigen::Index frames() const { return hands[1].frames(); }

  void validate() const {
    hands[0].validate();
    hands[1].validate();
    require(hands[0].frames() == hands[1].frames(), "left and right tracks differ in length");
  }
};

}  // namespace hoisynth
