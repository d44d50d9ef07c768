#pragma once

#include <cmath>
#include <vector>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/geometry/nearest.hpp"

namespace hoisynth {

/// Per-frame contact vectors for one hand: row k of frame i is the nearest
/// hand point minus anchor k. Anchors follow the feature layout [top | bottom].
using ContactFrames = std::vector<Points>;

/// Contact vectors of one frame against an arbitrary hand point set.
inline Points contact_frame(const Points& hand_points, const Points& anchors, std::vector<int>* assignment = nullptr) {
  if (hand_points.rows() == 0) throw InvalidInput("hand point set is empty");
  const KdTree tree(hand_points);
  Points out(anchors.rows(), 3);
  if (assignment) assignment->resize(static_cast<std::size_t>(anchors.rows()));
  for (Eigen::Index k = 0; k < anchors.rows(); ++k) {
    const NearestResult nn = tree.nearest(anchors.row(k).transpose());
    out.row(k) = nn.vector.transpose();
    if (assignment) (*assignment)[static_cast<std::size_t>(k)] = nn.index;
  }
  return out;
}

/// Ground-truth map from dense hand surfaces.
inline ContactFrames gt_contact(const std::vector<Points>& hand_vertices, const std::vector<Points>& anchors) {
  require(hand_vertices.size() == anchors.size(), "hand and anchor sequences differ in length");
  ContactFrames out;
  out.reserve(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) out.push_back(contact_frame(hand_vertices[i], anchors[i]));
  return out;
}

/// Map implied by sparse keypoints; same formula with the keypoints as the
/// hand set.
inline ContactFrames derived_contact(const std::vector<Points>& keypoints, const std::vector<Points>& anchors) {
  return gt_contact(keypoints, anchors);
}

inline double discrepancy_value(const ContactFrames& c_hat, const ContactFrames& c_tilde) {
  require(c_hat.size() == c_tilde.size(), "contact maps differ in frame count");
  double total = 0.0;
  for (std::size_t i = 0; i < c_hat.size(); ++i) {
    require(c_hat[i].rows() == c_tilde[i].rows(), "contact maps differ in anchor count");
    total += (c_hat[i] - c_tilde[i]).rowwise().norm().sum();
  }
  return total;
}

struct Discrepancy {
  double value = 0.0;
  std::vector<Points> gradient;                // d value / d keypoints, per frame
  std::vector<std::vector<int>> assignment;    // nearest keypoint per anchor
};

/// Sum over frames and anchors of |C_hat - C_tilde(H)|, with C_tilde derived
/// from the keypoints H. The nearest-keypoint assignment is frozen at this
/// evaluation, so the gradient is a subgradient across assignment changes.
inline Discrepancy contact_discrepancy(const ContactFrames& c_hat, const std::vector<Points>& keypoints,
                                       const std::vector<Points>& anchors) {
  require(c_hat.size() == keypoints.size() && keypoints.size() == anchors.size(),
          "contact, keypoint and anchor sequences differ in length");
  Discrepancy d;
  d.gradient.resize(keypoints.size());
  d.assignment.resize(keypoints.size());
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    require(c_hat[i].rows() == anchors[i].rows(), "contact map and anchors differ in size");
    const Points c_tilde = contact_frame(keypoints[i], anchors[i], &d.assignment[i]);
    d.gradient[i] = Points::Zero(keypoints[i].rows(), 3);
    for (Eigen::Index k = 0; k < anchors[i].rows(); ++k) {
      const Vec3 r = (c_tilde.row(k) - c_hat[i].row(k)).transpose();
      const double n = r.norm();
      d.value += n;
      if (n > 0.0) d.gradient[i].row(d.assignment[i][static_cast<std::size_t>(k)]) += (r / n).transpose();
    }
  }
  return d;
}

/// Spread anchor scalars to every mesh vertex by nearest anchor.
inline VecX densify_contact(const Points& anchors, const VecX& anchor_values, const Points& mesh_vertices) {
  require(anchors.rows() == anchor_values.size(), "one value per anchor required");
  require(anchors.rows() > 0, "anchor set is empty");
  const KdTree tree(anchors);
  VecX out(mesh_vertices.rows());
  for (Eigen::Index v = 0; v < mesh_vertices.rows(); ++v)
    out(v) = anchor_values(tree.nearest(mesh_vertices.row(v).transpose()).index);
  return out;
}

inline VecX contact_norms(const Points& c) { return c.rowwise().norm(); }

}  // namespace hoisynth
