#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <tuple>
#include <vector>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/geometry/mesh.hpp"

namespace hoisynth {

namespace detail {

struct MeshBuilder {
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;

  void quad(int a, int b, int c, int d) {
    tris.push_back({a, b, c});
    tris.push_back({a, c, d});
  }

  Mesh finish(Part part) const {
    Mesh m;
    m.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) m.vertices.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
    m.faces.resize(static_cast<Eigen::Index>(tris.size()), 3);
    for (std::size_t i = 0; i < tris.size(); ++i)
      m.faces.row(static_cast<Eigen::Index>(i)) << tris[i][0], tris[i][1], tris[i][2];
    m.part_ids.assign(verts.size(), part);
    return m;
  }
};

}  // namespace detail

/// Closed axis-aligned box tessellated on a lattice with roughly `spacing`
/// between neighbouring vertices. Faces wind outward.
inline Mesh make_box(const Vec3& lo, const Vec3& hi, double spacing, Part part = Part::kBottom) {
  require((hi - lo).minCoeff() > 0.0, "box must have positive extent");
  require(spacing > 0.0, "box spacing must be positive");
  std::array<int, 3> n{};
  for (int a = 0; a < 3; ++a) n[static_cast<std::size_t>(a)] = std::max(1, static_cast<int>(std::ceil((hi[a] - lo[a]) / spacing)));
  detail::MeshBuilder mb;
  std::map<std::tuple<int, int, int>, int> index;
  const auto vertex = [&](int i, int j, int k) {
    const auto key = std::make_tuple(i, j, k);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    const Vec3 p(lo.x() + (hi.x() - lo.x()) * i / n[0], lo.y() + (hi.y() - lo.y()) * j / n[1],
                 lo.z() + (hi.z() - lo.z()) * k / n[2]);
    const int id = static_cast<int>(mb.verts.size());
    mb.verts.push_back(p);
    index.emplace(key, id);
    return id;
  };
  // For each axis a, the two faces at lattice coordinate 0 and n[a].
  for (int a = 0; a < 3; ++a) {
    const int b = (a + 1) % 3;
    const int c = (a + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      const int fixed = side == 0 ? 0 : n[static_cast<std::size_t>(a)];
      for (int u = 0; u < n[static_cast<std::size_t>(b)]; ++u) {
        for (int v = 0; v < n[static_cast<std::size_t>(c)]; ++v) {
          const auto at = [&](int uu, int vv) {
            std::array<int, 3> ijk{};
            ijk[static_cast<std::size_t>(a)] = fixed;
            ijk[static_cast<std::size_t>(b)] = uu;
            ijk[static_cast<std::size_t>(c)] = vv;
            return vertex(ijk[0], ijk[1], ijk[2]);
          };
          const int p00 = at(u, v), p10 = at(u + 1, v), p11 = at(u + 1, v + 1), p01 = at(u, v + 1);
          // (b, c, a) is right-handed, so b x c points along +a.
          if (side == 1)
            mb.quad(p00, p10, p11, p01);
          else
            mb.quad(p00, p01, p11, p10);
        }
      }
    }
  }
  return mb.finish(part);
}

/// Closed cylinder along z from z0 to z1 with flat capped ends.
inline Mesh make_cylinder(double radius, double z0, double z1, double spacing, Part part = Part::kBottom) {
  require(radius > 0.0 && z1 > z0, "cylinder must have positive radius and height");
  require(spacing > 0.0, "cylinder spacing must be positive");
  const int segments = std::max(8, static_cast<int>(std::ceil(2.0 * std::numbers::pi * radius / spacing)));
  const int rings = std::max(1, static_cast<int>(std::ceil((z1 - z0) / spacing)));
  const int cap_rings = std::max(1, static_cast<int>(std::ceil(radius / spacing)));
  detail::MeshBuilder mb;
  const auto ring_point = [&](double r, int s, double z) {
    const double t = 2.0 * std::numbers::pi * s / segments;
    return Vec3(r * std::cos(t), r * std::sin(t), z);
  };
  // Side rings, index = ring * segments + s.
  for (int k = 0; k <= rings; ++k)
    for (int s = 0; s < segments; ++s) mb.verts.push_back(ring_point(radius, s, z0 + (z1 - z0) * k / rings));
  const auto side = [&](int k, int s) { return k * segments + (s % segments); };
  for (int k = 0; k < rings; ++k)
    for (int s = 0; s < segments; ++s) mb.quad(side(k, s), side(k, s + 1), side(k + 1, s + 1), side(k + 1, s));
  // Caps: concentric inner rings plus a centre vertex. The outermost ring is
  // shared with the side.
  for (int cap = 0; cap < 2; ++cap) {
    const double z = cap == 0 ? z0 : z1;
    std::vector<int> ring_start(static_cast<std::size_t>(cap_rings + 1));
    ring_start[static_cast<std::size_t>(cap_rings)] = cap == 0 ? side(0, 0) : side(rings, 0);
    for (int r = cap_rings - 1; r >= 1; --r) {
      ring_start[static_cast<std::size_t>(r)] = static_cast<int>(mb.verts.size());
      for (int s = 0; s < segments; ++s) mb.verts.push_back(ring_point(radius * r / cap_rings, s, z));
    }
    const int centre = static_cast<int>(mb.verts.size());
    mb.verts.emplace_back(0.0, 0.0, z);
    const auto at = [&](int r, int s) { return ring_start[static_cast<std::size_t>(r)] + (s % segments); };
    for (int r = 1; r < cap_rings; ++r) {
      for (int s = 0; s < segments; ++s) {
        if (cap == 1)
          mb.quad(at(r, s), at(r + 1, s), at(r + 1, s + 1), at(r, s + 1));
        else
          mb.quad(at(r, s), at(r, s + 1), at(r + 1, s + 1), at(r + 1, s));
      }
    }
    for (int s = 0; s < segments; ++s) {
      if (cap == 1)
        mb.tris.push_back({centre, at(1, s), at(1, s + 1)});
      else
        mb.tris.push_back({centre, at(1, s + 1), at(1, s)});
    }
  }
  return mb.finish(part);
}

/// Unit-radius icosphere (scaled by `radius`) after `subdivisions` rounds of
/// midpoint subdivision.
inline Mesh make_icosphere(double radius, int subdivisions, Part part = Part::kBottom) {
  require(radius > 0.0 && subdivisions >= 0, "icosphere needs positive radius");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int it = 0; it < subdivisions; ++it) {
    std::map<std::pair<int, int>, int> mid;
    const auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto found = mid.find(key);
      if (found != mid.end()) return found->second;
      v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> nf;
    nf.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int a = midpoint(tri[0], tri[1]);
      const int b = midpoint(tri[1], tri[2]);
      const int c = midpoint(tri[2], tri[0]);
      nf.push_back({tri[0], a, c});
      nf.push_back({tri[1], b, a});
      nf.push_back({tri[2], c, b});
      nf.push_back({a, b, c});
    }
    f = std::move(nf);
  }
  detail::MeshBuilder mb;
  for (const auto& p : v) mb.verts.push_back(radius * p);
  mb.tris = std::move(f);
  return mb.finish(part);
}

/// Per-vertex outward normals by area-weighted face normal accumulation.
inline Points vertex_normals(const Mesh& mesh) {
  Points n = Points::Zero(mesh.vertices.rows(), 3);
  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
    const Vec3 a = mesh.vertices.row(mesh.faces(f, 0)).transpose();
    const Vec3 b = mesh.vertices.row(mesh.faces(f, 1)).transpose();
    const Vec3 c = mesh.vertices.row(mesh.faces(f, 2)).transpose();
    const Vec3 fn = (b - a).cross(c - a);
    for (int k = 0; k < 3; ++k) n.row(mesh.faces(f, k)) += fn.transpose();
  }
  for (Eigen::Index i = 0; i < n.rows(); ++i) {
    const double len = n.row(i).norm();
    if (len > 0) n.row(i) /= len;
  }
  return n;
}

/// Total triangle area of the faces whose vertices all belong to `part`.
inline double surface_area(const Mesh& mesh, Part part) {
  double area = 0.0;
  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
    bool in = true;
    for (int k = 0; k < 3; ++k) in = in && mesh.part_ids[static_cast<std::size_t>(mesh.faces(f, k))] == part;
    if (!in) continue;
    const Vec3 a = mesh.vertices.row(mesh.faces(f, 0)).transpose();
    const Vec3 b = mesh.vertices.row(mesh.faces(f, 1)).transpose();
    const Vec3 c = mesh.vertices.row(mesh.faces(f, 2)).transpose();
    area += 0.5 * (b - a).cross(c - a).norm();
  }
  return area;
}

}  // namespace hoisynth
