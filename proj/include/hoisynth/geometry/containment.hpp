#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/geometry/mesh.hpp"

namespace hoisynth {

/// Throws unless every directed edge has exactly one opposite twin, i.e. the
/// surface is closed, edge-manifold and consistently oriented.
inline void check_watertight(const Mesh& mesh) {
  require(mesh.faces.rows() >= 4, "mesh is not watertight: fewer than 4 faces");
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(static_cast<std::size_t>(mesh.faces.rows() * 3));
  const auto key = [](int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  };
  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
    for (int e = 0; e < 3; ++e) {
      const int a = mesh.faces(f, e);
      const int b = mesh.faces(f, (e + 1) % 3);
      if (a == b) throw InvalidInput("mesh is not watertight: degenerate face " + std::to_string(f));
      if (++directed[key(a, b)] > 1)
        throw InvalidInput("mesh is not watertight: directed edge repeated (non-manifold or flipped faces)");
    }
  }
  for (const auto& [k, count] : directed) {
    const int a = static_cast<int>(k >> 32);
    const int b = static_cast<int>(k & 0xffffffffu);
    if (directed.find(key(b, a)) == directed.end())
      throw InvalidInput("mesh is not watertight: boundary edge (" + std::to_string(a) + ", " + std::to_string(b) + ")");
  }
}

/// Point-in-mesh queries by ray-crossing parity over a triangle BVH.
class MeshContainment {
 public:
  MeshContainment() = default;

  explicit MeshContainment(const Mesh& mesh) : vertices_(mesh.vertices), faces_(mesh.faces) {
    require(mesh.vertices.allFinite(), "mesh vertices must be finite");
    check_watertight(mesh);
    order_.resize(static_cast<std::size_t>(faces_.rows()));
    std::iota(order_.begin(), order_.end(), 0);
    boxes_.resize(static_cast<std::size_t>(faces_.rows()));
    centroids_.resize(faces_.rows(), 3);
    for (Eigen::Index f = 0; f < faces_.rows(); ++f) {
      Eigen::AlignedBox3d box;
      Vec3 c = Vec3::Zero();
      for (int k = 0; k < 3; ++k) {
        const Vec3 v = vertices_.row(faces_(f, k)).transpose();
        box.extend(v);
        c += v;
      }
      boxes_[static_cast<std::size_t>(f)] = box;
      centroids_.row(f) = (c / 3.0).transpose();
    }
    nodes_.reserve(static_cast<std::size_t>(2 * faces_.rows()));
    build(0, static_cast<int>(faces_.rows()));
    build_grid();
  }

  const Eigen::AlignedBox3d& bounds() const { return nodes_.front().box; }

  bool contains(const Vec3& p) const {
    require(p.allFinite(), "containment query must be finite");
    if (nodes_.empty() || !nodes_.front().box.contains(p)) return false;
    if (!cells_.empty()) {
      const std::uint8_t c = cells_[cell_of(p)];
      if (c != kSurfaceCell) return c == kInsideCell;
    }
    return exact_contains(p);
  }

  static Vec3 primary_direction() {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    return Vec3(1.0, phi, phi * phi).normalized();
  }

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int begin = 0, end = 0;
    int left = -1, right = -1;
  };

  static constexpr std::uint8_t kOutsideCell = 0;
  static constexpr std::uint8_t kInsideCell = 1;
  static constexpr std::uint8_t kSurfaceCell = 2;
  static constexpr std::uint8_t kUnknownCell = 3;

  bool exact_contains(const Vec3& p) const {
    bool degenerate = false;
    int crossings = count_crossings(p, primary_direction(), degenerate);
    if (degenerate) {
      degenerate = false;
      crossings = count_crossings(p, jittered_direction(), degenerate);
    }
    return (crossings % 2) == 1;
  }

  std::size_t cell_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(dims_[1]) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(dims_[2]) +
           static_cast<std::size_t>(k);
  }

  std::size_t cell_of(const Vec3& p) const {
    std::array<int, 3> ijk{};
    for (int a = 0; a < 3; ++a)
      ijk[static_cast<std::size_t>(a)] =
          std::clamp(static_cast<int>(std::floor((p[a] - origin_[a]) / cell_)), 0, dims_[static_cast<std::size_t>(a)] - 1);
    return cell_index(ijk[0], ijk[1], ijk[2]);
  }

  // Occupancy grid over the bounds. Cells whose closed box meets a
  // triangle's bounding box are answered exactly; every other cell is free
  // of surface, so its status is uniform and shared by its whole
  // surface-free connected component (one ray test per component).
  void build_grid() {
    if (nodes_.empty()) return;
    const Eigen::AlignedBox3d& b = nodes_.front().box;
    const Vec3 ext = b.sizes();
    cell_ = std::max(ext.maxCoeff() / 64.0, 1e-9);
    origin_ = b.min();
    for (int a = 0; a < 3; ++a) dims_[static_cast<std::size_t>(a)] = std::max(1, static_cast<int>(std::ceil(ext[a] / cell_)));
    cells_.assign(static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(dims_[2]),
                  kUnknownCell);
    const double pad = 1e-9 * (1.0 + ext.maxCoeff());
    for (const auto& box : boxes_) {
      std::array<int, 3> lo{}, hi{};
      for (int a = 0; a < 3; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        lo[ua] = std::clamp(static_cast<int>(std::floor((box.min()[a] - pad - origin_[a]) / cell_)), 0, dims_[ua] - 1);
        hi[ua] = std::clamp(static_cast<int>(std::floor((box.max()[a] + pad - origin_[a]) / cell_)), 0, dims_[ua] - 1);
      }
      for (int i = lo[0]; i <= hi[0]; ++i)
        for (int j = lo[1]; j <= hi[1]; ++j)
          for (int k = lo[2]; k <= hi[2]; ++k) cells_[cell_index(i, j, k)] = kSurfaceCell;
    }
    std::vector<std::array<int, 3>> queue;
    for (int i = 0; i < dims_[0]; ++i)
      for (int j = 0; j < dims_[1]; ++j)
        for (int k = 0; k < dims_[2]; ++k) {
          if (cells_[cell_index(i, j, k)] != kUnknownCell) continue;
          const Vec3 centre = origin_ + cell_ * Vec3(i + 0.5, j + 0.5, k + 0.5);
          const std::uint8_t state = exact_contains(centre) ? kInsideCell : kOutsideCell;
          cells_[cell_index(i, j, k)] = state;
          queue.assign(1, {i, j, k});
          while (!queue.empty()) {
            const auto c = queue.back();
            queue.pop_back();
            for (int a = 0; a < 3; ++a) {
              for (int step : {-1, 1}) {
                auto n = c;
                n[static_cast<std::size_t>(a)] += step;
                if (n[static_cast<std::size_t>(a)] < 0 || n[static_cast<std::size_t>(a)] >= dims_[static_cast<std::size_t>(a)]) continue;
                auto& cell = cells_[cell_index(n[0], n[1], n[2])];
                if (cell != kUnknownCell) continue;
                cell = state;
                queue.push_back(n);
              }
            }
          }
        }
  }

  static Vec3 jittered_direction() {
    return (primary_direction() + Vec3(0.0137, -0.0291, 0.0073)).normalized();
  }

  int build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    Eigen::AlignedBox3d box;
    Eigen::AlignedBox3d cbox;
    for (int i = begin; i < end; ++i) {
      const int f = order_[static_cast<std::size_t>(i)];
      box.extend(boxes_[static_cast<std::size_t>(f)]);
      cbox.extend(Vec3(centroids_.row(f).transpose()));
    }
    nodes_[static_cast<std::size_t>(id)].box = box;
    nodes_[static_cast<std::size_t>(id)].begin = begin;
    nodes_[static_cast<std::size_t>(id)].end = end;
    if (end - begin <= 4) return id;
    int axis = 0;
    cbox.sizes().maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) { return centroids_(a, axis) < centroids_(b, axis); });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  static bool ray_hits_box(const Eigen::AlignedBox3d& box, const Vec3& o, const Vec3& inv_d) {
    double t0 = 0.0;
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      double tn = (box.min()[a] - o[a]) * inv_d[a];
      double tf = (box.max()[a] - o[a]) * inv_d[a];
      if (tn > tf) std::swap(tn, tf);
      t0 = std::max(t0, tn);
      t1 = std::min(t1, tf);
      if (t0 > t1 * (1.0 + 1e-12) + 1e-15) return false;
    }
    return true;
  }

  // Moller-Trumbore. Flags hits that graze an edge, a vertex, the triangle
  // plane, or start on the surface.
  bool hit_triangle(int f, const Vec3& o, const Vec3& d, bool& degenerate) const {
    const Vec3 a = vertices_.row(faces_(f, 0)).transpose();
    const Vec3 b = vertices_.row(faces_(f, 1)).transpose();
    const Vec3 c = vertices_.row(faces_(f, 2)).transpose();
    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    const Vec3 pv = d.cross(e2);
    const double det = e1.dot(pv);
    const double scale = e1.norm() * e2.norm();
    constexpr double kEps = 1e-10;
    if (std::abs(det) <= kEps * scale) {
      // Ray parallel to the plane: only a problem if it lies in it.
      const Vec3 n = e1.cross(e2);
      if (std::abs(n.dot(o - a)) <= kEps * scale * (1.0 + (o - a).norm())) degenerate = true;
      return false;
    }
    const double inv = 1.0 / det;
    const Vec3 tv = o - a;
    const double u = tv.dot(pv) * inv;
    if (u < -kEps || u > 1.0 + kEps) return false;
    const Vec3 qv = tv.cross(e1);
    const double v = d.dot(qv) * inv;
    if (v < -kEps || u + v > 1.0 + kEps) return false;
    const double t = e2.dot(qv) * inv;
    const double len = std::sqrt(scale);
    if (std::abs(t) <= kEps * (1.0 + len)) {
      degenerate = true;
      return false;
    }
    if (t < 0.0) return false;
    if (u <= kEps || v <= kEps || u + v >= 1.0 - kEps) degenerate = true;
    return true;
  }

  int count_crossings(const Vec3& o, const Vec3& d, bool& degenerate) const {
    const Vec3 inv_d = d.cwiseInverse();
    int crossings = 0;
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const Node& n = nodes_[static_cast<std::size_t>(stack.back())];
      stack.pop_back();
      if (!ray_hits_box(n.box, o, inv_d)) continue;
      if (n.left < 0) {
        for (int i = n.begin; i < n.end; ++i)
          crossings += hit_triangle(order_[static_cast<std::size_t>(i)], o, d, degenerate) ? 1 : 0;
      } else {
        stack.push_back(n.left);
        stack.push_back(n.right);
      }
    }
    return crossings;
  }

  Points vertices_;
  Faces faces_;
  std::vector<int> order_;
  std::vector<Eigen::AlignedBox3d> boxes_;
  Points centroids_;
  std::vector<Node> nodes_;
  Vec3 origin_ = Vec3::Zero();
  double cell_ = 1.0;
  std::array<int, 3> dims_{};
  std::vector<std::uint8_t> cells_;
};

/// One-shot membership test; builds the acceleration structure per call.
inline bool point_inside_mesh(const Mesh& mesh, const Vec3& p) {
  return MeshContainment(mesh).contains(p);
}

}  // namespace hoisynth
