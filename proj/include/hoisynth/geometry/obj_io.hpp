#pragma once

#include <array>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"
#include "hoisynth/geometry/mesh.hpp"

namespace hoisynth {

/// Named vertex block for OBJ files; faces index the block's own vertices.
struct ObjGroup {
  std::string name;
  Points vertices;
  Faces faces;
};

/// Writes groups sequentially. Coordinates use 17 significant digits so
/// doubles survive a text round trip unchanged.
inline void write_obj(std::ostream& os, const std::vector<ObjGroup>& groups) {
  os << std::setprecision(17);
  Eigen::Index offset = 1;
  for (const auto& g : groups) {
    os << "g " << g.name << '\n';
    for (Eigen::Index i = 0; i < g.vertices.rows(); ++i)
      os << "v " << g.vertices(i, 0) << ' ' << g.vertices(i, 1) << ' ' << g.vertices(i, 2) << '\n';
    for (Eigen::Index f = 0; f < g.faces.rows(); ++f)
      os << "f " << g.faces(f, 0) + offset << ' ' << g.faces(f, 1) + offset << ' ' << g.faces(f, 2) + offset << '\n';
    offset += g.vertices.rows();
  }
}

namespace detail {

struct ObjParse {
  std::vector<Vec3> verts;
  std::vector<std::string> vert_group;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::string> face_group;
};

inline int parse_obj_index(const std::string& token, int nverts) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  try {
    idx = std::stoi(head);
  } catch (const std::exception&) {
    throw FormatError("OBJ: bad face index '" + token + "'");
  }
  if (idx < 0) idx = nverts + idx + 1;
  if (idx < 1 || idx > nverts) throw FormatError("OBJ: face index out of range '" + token + "'");
  return idx - 1;
}

inline ObjParse parse_obj(std::istream& is) {
  ObjParse out;
  std::string group = "default";
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) throw FormatError("OBJ: malformed vertex line");
      out.verts.push_back(p);
      out.vert_group.push_back(group);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) poly.push_back(parse_obj_index(tok, static_cast<int>(out.verts.size())));
      if (poly.size() < 3) throw FormatError("OBJ: face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        out.faces.push_back({poly[0], poly[k], poly[k + 1]});
        out.face_group.push_back(group);
      }
    } else if (tag == "g" || tag == "o") {
      ls >> group;
    }
  }
  return out;
}

}  // namespace detail

/// Reads an OBJ back into its groups (vertices keep file order per group).
inline std::vector<ObjGroup> read_obj_groups(std::istream& is) {
  const auto parsed = detail::parse_obj(is);
  std::vector<ObjGroup> groups;
  std::vector<int> local(parsed.verts.size());
  std::vector<int> owner(parsed.verts.size());
  const auto group_of = [&](const std::string& name) {
    for (std::size_t g = 0; g < groups.size(); ++g)
      if (groups[g].name == name) return static_cast<int>(g);
    groups.push_back({name, Points(0, 3), Faces(0, 3)});
    return static_cast<int>(groups.size()) - 1;
  };
  std::vector<std::vector<Vec3>> gv;
  for (std::size_t i = 0; i < parsed.verts.size(); ++i) {
    const int g = group_of(parsed.vert_group[i]);
    if (gv.size() < groups.size()) gv.resize(groups.size());
    owner[i] = g;
    local[i] = static_cast<int>(gv[static_cast<std::size_t>(g)].size());
    gv[static_cast<std::size_t>(g)].push_back(parsed.verts[i]);
  }
  gv.resize(groups.size());
  std::vector<std::vector<std::array<int, 3>>> gf(groups.size());
  for (const auto& f : parsed.faces) {
    const int g = owner[static_cast<std::size_t>(f[0])];
    for (int k = 1; k < 3; ++k)
      if (owner[static_cast<std::size_t>(f[k])] != g) throw FormatError("OBJ: face spans vertex groups");
    gf[static_cast<std::size_t>(g)].push_back({local[static_cast<std::size_t>(f[0])], local[static_cast<std::size_t>(f[1])],
                                               local[static_cast<std::size_t>(f[2])]});
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    groups[g].vertices.resize(static_cast<Eigen::Index>(gv[g].size()), 3);
    for (std::size_t i = 0; i < gv[g].size(); ++i) groups[g].vertices.row(static_cast<Eigen::Index>(i)) = gv[g][i].transpose();
    groups[g].faces.resize(static_cast<Eigen::Index>(gf[g].size()), 3);
    for (std::size_t i = 0; i < gf[g].size(); ++i)
      groups[g].faces.row(static_cast<Eigen::Index>(i)) << gf[g][i][0], gf[g][i][1], gf[g][i][2];
  }
  return groups;
}

/// Mesh to OBJ with vertex runs grouped as "top"/"bottom"; vertex order and
/// face indices are preserved exactly.
inline void write_mesh_obj(std::ostream& os, const Mesh& mesh) {
  os << std::setprecision(17);
  Part current = Part::kBottom;
  bool first = true;
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
    const Part p = mesh.part_ids[static_cast<std::size_t>(i)];
    if (first || p != current) {
      os << "g " << part_name(p) << '\n';
      current = p;
      first = false;
    }
    os << "v " << mesh.vertices(i, 0) << ' ' << mesh.vertices(i, 1) << ' ' << mesh.vertices(i, 2) << '\n';
  }
  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f)
    os << "f " << mesh.faces(f, 0) + 1 << ' ' << mesh.faces(f, 1) + 1 << ' ' << mesh.faces(f, 2) + 1 << '\n';
}

inline Mesh read_mesh_obj(std::istream& is) {
  const auto parsed = detail::parse_obj(is);
  Mesh m;
  m.vertices.resize(static_cast<Eigen::Index>(parsed.verts.size()), 3);
  for (std::size_t i = 0; i < parsed.verts.size(); ++i) {
    m.vertices.row(static_cast<Eigen::Index>(i)) = parsed.verts[i].transpose();
    const auto& g = parsed.vert_group[i];
    if (g == "top")
      m.part_ids.push_back(Part::kTop);
    else if (g == "bottom")
      m.part_ids.push_back(Part::kBottom);
    else
      throw FormatError("OBJ: vertex outside the 'top'/'bottom' groups (group '" + g + "')");
  }
  m.faces.resize(static_cast<Eigen::Index>(parsed.faces.size()), 3);
  for (std::size_t f = 0; f < parsed.faces.size(); ++f)
    m.faces.row(static_cast<Eigen::Index>(f)) << parsed.faces[f][0], parsed.faces[f][1], parsed.faces[f][2];
  m.validate();
  return m;
}

inline void save_mesh_obj(const std::string& path, const Mesh& mesh) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  write_mesh_obj(os, mesh);
}

inline Mesh load_mesh_obj(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open '" + path + "'");
  return read_mesh_obj(is);
}

}  // namespace hoisynth
