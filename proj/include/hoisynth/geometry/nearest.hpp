#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"

namespace hoisynth {

struct NearestResult {
  int index = -1;
  double distance = 0.0;
  Vec3 vector = Vec3::Zero();  // reference point minus query
};

/// Exact nearest-neighbour index over a fixed point set.
///
/// Ties are broken by the lowest reference index, so results match a
/// linear scan bit for bit. Small sets fall back to the scan.
class KdTree {
 public:
  KdTree() = default;

  explicit KdTree(Points points, int leaf_size = 8) : points_(std::move(points)), leaf_size_(leaf_size) {
    require(points_.rows() > 0, "nearest-neighbour reference set is empty");
    require(points_.allFinite(), "reference points must be finite");
    perm_.resize(static_cast<std::size_t>(points_.rows()));
    std::iota(perm_.begin(), perm_.end(), 0);
    if (points_.rows() > kBruteForceBelow) {
      nodes_.reserve(static_cast<std::size_t>(2 * points_.rows() / leaf_size_ + 2));
      build(0, static_cast<int>(points_.rows()));
    }
  }

  const Points& points() const { return points_; }
  Eigen::Index size() const { return points_.rows(); }
  bool empty() const { return points_.rows() == 0; }

  NearestResult nearest(const Vec3& q) const {
    require(!empty(), "nearest-neighbour reference set is empty");
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    if (nodes_.empty()) {
      scan(0, static_cast<int>(points_.rows()), q, best, best_d2);
    } else {
      search(0, q, best, best_d2);
    }
    NearestResult r;
    r.index = best;
    r.vector = points_.row(best).transpose() - q;
    r.distance = std::sqrt(best_d2);
    return r;
  }

 private:
  static constexpr Eigen::Index kBruteForceBelow = 32;

  struct Node {
    int begin = 0, end = 0;
    int left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
  };

  static double dist2(const Points& pts, int i, const Vec3& q) {
    return (pts.row(i).transpose() - q).squaredNorm();
  }

  int build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size_) return id;
    Eigen::Vector3d lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (int i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_.row(perm_[static_cast<std::size_t>(i)]).transpose());
      hi = hi.cwiseMax(points_.row(perm_[static_cast<std::size_t>(i)]).transpose());
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(perm_.begin() + begin, perm_.begin() + mid, perm_.begin() + end,
                     [&](int a, int b) { return points_(a, axis) < points_(b, axis); });
    const double split = points_(perm_[static_cast<std::size_t>(mid)], axis);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    Node& n = nodes_[static_cast<std::size_t>(id)];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
  }

  void scan(int begin, int end, const Vec3& q, int& best, double& best_d2) const {
    for (int k = begin; k < end; ++k) {
      const int i = perm_[static_cast<std::size_t>(k)];
      const double d2 = dist2(points_, i, q);
      if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
        best_d2 = d2;
        best = i;
      }
    }
  }

  void search(int node_id, const Vec3& q, int& best, double& best_d2) const {
    const Node& n = nodes_[static_cast<std::size_t>(node_id)];
    if (n.left < 0) {
      scan(n.begin, n.end, q, best, best_d2);
      return;
    }
    const double diff = q[n.axis] - n.split;
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    search(near, q, best, best_d2);
    // Equal bounds still descend so a lower-index tie on the far side wins.
    if (diff * diff <= best_d2) search(far, q, best, best_d2);
  }

  Points points_;
  int leaf_size_ = 8;
  std::vector<int> perm_;
  std::vector<Node> nodes_;
};

/// Nearest reference point for every query row.
inline std::vector<NearestResult> nearest_vertex(const Points& query, const Points& reference) {
  require(reference.rows() > 0, "nearest_vertex: reference set is empty");
  require(query.allFinite(), "nearest_vertex: query points must be finite");
  const KdTree tree(reference);
  std::vector<NearestResult> out(static_cast<std::size_t>(query.rows()));
  for (Eigen::Index i = 0; i < query.rows(); ++i) out[static_cast<std::size_t>(i)] = tree.nearest(query.row(i).transpose());
  return out;
}

}  // namespace hoisynth
