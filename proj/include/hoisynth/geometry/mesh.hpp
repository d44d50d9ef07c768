#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"

namespace hoisynth {

enum class Part : std::uint8_t { kTop = 0, kBottom = 1 };

inline const char* part_name(Part p) { return p == Part::kTop ? "top" : "bottom"; }

/// Triangle mesh with a part label per vertex.
struct Mesh {
  Points vertices;
  Faces faces;
  std::vector<Part> part_ids;

  Eigen::Index num_vertices() const { return vertices.rows(); }
  Eigen::Index num_faces() const { return faces.rows(); }

  std::vector<int> part_indices(Part p) const {
    std::vector<int> idx;
    for (std::size_t i = 0; i < part_ids.size(); ++i)
      if (part_ids[i] == p) idx.push_back(static_cast<int>(i));
    return idx;
  }

  std::size_t part_count(Part p) const {
    std::size_t n = 0;
    for (Part q : part_ids) n += (q == p);
    return n;
  }

  /// Face indices in range, coordinates finite, labels sized to vertices,
  /// and every label that occurs carries at least four vertices.
  void validate() const {
    require(vertices.rows() > 0, "mesh has no vertices");
    require(vertices.allFinite(), "mesh vertices must be finite");
    require(static_cast<Eigen::Index>(part_ids.size()) == vertices.rows(),
            "part_ids must have one entry per vertex");
    if (faces.size() > 0) {
      require(faces.minCoeff() >= 0 && faces.maxCoeff() < vertices.rows(),
              "face index out of range");
    }
    for (Part p : {Part::kTop, Part::kBottom}) {
      const std::size_t n = part_count(p);
      require(n == 0 || n >= 4, std::string("part '") + part_name(p) + "' needs at least 4 vertices");
    }
  }

  /// Sub-mesh made of one part's vertices and the faces fully inside it.
  Mesh extract_part(Part p, std::vector<int>* global_index = nullptr) const {
    std::vector<int> remap(static_cast<std::size_t>(vertices.rows()), -1);
    std::vector<int> kept;
    for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
      if (part_ids[static_cast<std::size_t>(i)] == p) {
        remap[static_cast<std::size_t>(i)] = static_cast<int>(kept.size());
        kept.push_back(static_cast<int>(i));
      }
    }
    Mesh out;
    out.vertices.resize(static_cast<Eigen::Index>(kept.size()), 3);
    for (std::size_t k = 0; k < kept.size(); ++k) out.vertices.row(static_cast<Eigen::Index>(k)) = vertices.row(kept[k]);
    std::vector<std::array<int, 3>> f;
    for (Eigen::Index r = 0; r < faces.rows(); ++r) {
      const int a = remap[static_cast<std::size_t>(faces(r, 0))];
      const int b = remap[static_cast<std::size_t>(faces(r, 1))];
      const int c = remap[static_cast<std::size_t>(faces(r, 2))];
      if (a >= 0 && b >= 0 && c >= 0) f.push_back({a, b, c});
    }
    out.faces.resize(static_cast<Eigen::Index>(f.size()), 3);
    for (std::size_t r = 0; r < f.size(); ++r)
      out.faces.row(static_cast<Eigen::Index>(r)) << f[r][0], f[r][1], f[r][2];
    out.part_ids.assign(kept.size(), p);
    if (global_index) *global_index = std::move(kept);
    return out;
  }
};

/// Concatenate meshes, offsetting face indices.
inline Mesh merge_meshes(const std::vector<Mesh>& parts) {
  Eigen::Index nv = 0, nf = 0;
  for (const auto& m : parts) {
    nv += m.vertices.rows();
    nf += m.faces.rows();
  }
  Mesh out;
  out.vertices.resize(nv, 3);
  out.faces.resize(nf, 3);
  Eigen::Index v0 = 0, f0 = 0;
  for (const auto& m : parts) {
    out.vertices.middleRows(v0, m.vertices.rows()) = m.vertices;
    if (m.faces.rows() > 0)
      out.faces.middleRows(f0, m.faces.rows()) = m.faces.array() + static_cast<int>(v0);
    out.part_ids.insert(out.part_ids.end(), m.part_ids.begin(), m.part_ids.end());
    v0 += m.vertices.rows();
    f0 += m.faces.rows();
  }
  return out;
}

}  // namespace hoisynth
