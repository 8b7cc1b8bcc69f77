/*
 * Copyright 2026 The geofeat Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "geofeat/mesh.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "geofeat/error.hpp"

namespace geofeat {
namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

// Parses "i", "i/ti" or "i/ti/ni" (1-based) into zero-based indices.
void parse_corner(const std::string& tok, int lineno, int* vi, int* ti) {
  *ti = -1;
  const auto slash = tok.find('/');
  try {
    *vi = std::stoi(tok.substr(0, slash)) - 1;
    if (slash != std::string::npos) {
      const auto rest = tok.substr(slash + 1);
      const auto slash2 = rest.find('/');
      const auto t = rest.substr(0, slash2);
      if (!t.empty()) *ti = std::stoi(t) - 1;
    }
  } catch (const std::exception&) {
    throw_data("mesh line " + std::to_string(lineno) + ": bad face corner '" +
               tok + "'");
  }
}

}  // namespace

double face_area(const TriangleMesh& mesh, int face) {
  const Face& f = mesh.faces[face];
  const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
  const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
  return 0.5 * e1.cross(e2).norm();
}

double longest_edge(const TriangleMesh& mesh, int face) {
  const Face& f = mesh.faces[face];
  double m = 0.0;
  for (int i = 0; i < 3; ++i) {
    m = std::max(m, (mesh.vertices[f[i]] - mesh.vertices[f[(i + 1) % 3]]).norm());
  }
  return m;
}

int count_components(const TriangleMesh& mesh) {
  const int n = mesh.vertex_count();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (const Face& f : mesh.faces) {
    for (int i = 0; i < 3; ++i) {
      const int a = find_root(parent, f[i]);
      const int b = find_root(parent, f[(i + 1) % 3]);
      if (a != b) parent[a] = b;
    }
  }
  int count = 0;
  for (int v = 0; v < n; ++v) {
    // Unreferenced vertices count as components of their own.
    if (find_root(parent, v) == v) ++count;
  }
  return count;
}

void validate_mesh(const TriangleMesh& mesh) {
  const int nv = mesh.vertex_count();
  if (nv == 0 || mesh.faces.empty()) throw_data("mesh is empty");
  if (mesh.has_uv() && mesh.uv.size() != mesh.faces.size()) {
    throw_data("uv table does not match face count");
  }
  for (int fi = 0; fi < mesh.face_count(); ++fi) {
    const Face& f = mesh.faces[fi];
    for (int v : f) {
      if (v < 0 || v >= nv) {
        throw_data("face " + std::to_string(fi) + " references vertex " +
                   std::to_string(v + 1) + " of a " + std::to_string(nv) +
                   "-vertex mesh");
      }
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2] ||
        face_area(mesh, fi) <= kMinFaceArea) {
      throw_data("face " + std::to_string(fi) + " is degenerate");
    }
  }
  std::map<std::uint64_t, int> edge_count;
  for (const Face& f : mesh.faces) {
    for (int i = 0; i < 3; ++i) {
      const int c = ++edge_count[edge_key(f[i], f[(i + 1) % 3])];
      if (c > 2) {
        throw_data("non-manifold edge (" + std::to_string(f[i] + 1) + ", " +
                   std::to_string(f[(i + 1) % 3] + 1) + ")");
      }
    }
  }
  const int components = count_components(mesh);
  if (components != 1) {
    throw_data("mesh is disconnected: " + std::to_string(components) +
               " components");
  }
}

TriangleMesh parse_mesh(const std::string& text) {
  TriangleMesh mesh;
  std::vector<Vec2> texcoords;
  std::vector<std::array<int, 3>> face_tex;
  bool any_tex = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) {
        throw_data("mesh line " + std::to_string(lineno) + ": bad vertex");
      }
      mesh.vertices.push_back(p);
    } else if (tag == "vt") {
      Vec2 t;
      if (!(ls >> t.x() >> t.y())) {
        throw_data("mesh line " + std::to_string(lineno) + ": bad texcoord");
      }
      texcoords.push_back(t);
    } else if (tag == "f") {
      std::vector<std::string> toks;
      std::string tok;
      while (ls >> tok) toks.push_back(tok);
      if (toks.size() != 3) {
        throw_data("mesh line " + std::to_string(lineno) +
                   ": only triangles are supported");
      }
      Face f;
      std::array<int, 3> t;
      for (int i = 0; i < 3; ++i) parse_corner(toks[i], lineno, &f[i], &t[i]);
      if (t[0] >= 0) any_tex = true;
      mesh.faces.push_back(f);
      face_tex.push_back(t);
    } else {
      throw_data("mesh line " + std::to_string(lineno) + ": unknown tag '" +
                 tag + "'");
    }
  }
  if (any_tex) {
    mesh.uv.resize(mesh.faces.size());
    for (size_t fi = 0; fi < face_tex.size(); ++fi) {
      for (int i = 0; i < 3; ++i) {
        const int t = face_tex[fi][i];
        if (t < 0 || t >= static_cast<int>(texcoords.size())) {
          throw_data("face " + std::to_string(fi) +
                     " has a missing or out-of-range texcoord index");
        }
        mesh.uv[fi][i] = texcoords[t];
      }
    }
  }
  validate_mesh(mesh);
  return mesh;
}

TriangleMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open mesh file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_mesh(ss.str());
}

std::string format_mesh(const TriangleMesh& mesh) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (const Vec3& v : mesh.vertices) {
    out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  }
  if (mesh.has_uv()) {
    for (const auto& corners : mesh.uv) {
      for (const Vec2& t : corners) out << "vt " << t.x() << " " << t.y() << "\n";
    }
    for (size_t fi = 0; fi < mesh.faces.size(); ++fi) {
      const Face& f = mesh.faces[fi];
      out << "f";
      for (int i = 0; i < 3; ++i) {
        out << " " << f[i] + 1 << "/" << 3 * fi + i + 1;
      }
      out << "\n";
    }
  } else {
    for (const Face& f : mesh.faces) {
      out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
    }
  }
  return out.str();
}

void save_mesh(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write mesh file: " + path);
  out << format_mesh(mesh);
  if (!out) throw_io("write failed: " + path);
}

void check_surface_point(const TriangleMesh& mesh, const SurfacePoint& sp) {
  if (sp.face < 0 || sp.face >= mesh.face_count()) {
    throw_data("surface point face index " + std::to_string(sp.face) +
               " out of range");
  }
  double sum = 0.0;
  for (double b : sp.bary) {
    if (!(b >= -kBaryTolerance)) throw_data("negative barycentric coordinate");
    sum += b;
  }
  if (std::abs(sum - 1.0) > kBaryTolerance) {
    throw_data("barycentric coordinates do not sum to 1");
  }
}

Vec3 surface_point_position(const TriangleMesh& mesh, const SurfacePoint& sp) {
  check_surface_point(mesh, sp);
  const Face& f = mesh.faces[sp.face];
  return sp.bary[0] * mesh.vertices[f[0]] + sp.bary[1] * mesh.vertices[f[1]] +
         sp.bary[2] * mesh.vertices[f[2]];
}

SurfacePoint vertex_surface_point(const TriangleMesh& mesh, int v) {
  for (int fi = 0; fi < mesh.face_count(); ++fi) {
    for (int i = 0; i < 3; ++i) {
      if (mesh.faces[fi][i] == v) {
        SurfacePoint sp{fi, {0.0, 0.0, 0.0}};
        sp.bary[i] = 1.0;
        return sp;
      }
    }
  }
  throw_data("vertex " + std::to_string(v) + " has no incident face");
}

TriangleMesh make_icosphere(int subdivisions, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (Vec3& v : m.vertices) v.normalize();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::uint64_t, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = edge_key(a, b);
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = m.vertex_count();
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Face> next;
    next.reserve(m.faces.size() * 4);
    for (const Face& f : m.faces) {
      const int a = mid(f[0], f[1]);
      const int b = mid(f[1], f[2]);
      const int c = mid(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    m.faces = std::move(next);
  }
  for (Vec3& v : m.vertices) v *= radius;
  return m;
}

TriangleMesh make_grid(int nx, int ny, double sx, double sy) {
  TriangleMesh m;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      m.vertices.emplace_back(sx * i / nx, sy * j / ny, 0.0);
    }
  }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

MeshTopology::MeshTopology(const TriangleMesh& mesh) {
  const int nv = mesh.vertex_count();
  const int nf = mesh.face_count();
  face_edges.resize(nf);
  vertex_faces.resize(nv);
  vertex_edges.resize(nv);
  vertex_angle.assign(nv, 0.0);
  vertex_boundary.assign(nv, 0);
  std::map<std::uint64_t, int> index;
  for (int fi = 0; fi < nf; ++fi) {
    const Face& f = mesh.faces[fi];
    for (int i = 0; i < 3; ++i) {
      vertex_faces[f[i]].push_back(fi);
      const int a = f[(i + 1) % 3];
      const int b = f[(i + 2) % 3];
      const auto key = edge_key(a, b);
      auto it = index.find(key);
      if (it == index.end()) {
        const int e = static_cast<int>(edges.size());
        edges.push_back({std::min(a, b), std::max(a, b), {fi, -1},
                         (mesh.vertices[a] - mesh.vertices[b]).norm()});
        vertex_edges[a].push_back(e);
        vertex_edges[b].push_back(e);
        index.emplace(key, e);
        face_edges[fi][i] = e;
      } else {
        edges[it->second].faces[1] = fi;
        face_edges[fi][i] = it->second;
      }
      const Vec3 u = mesh.vertices[a] - mesh.vertices[f[i]];
      const Vec3 w = mesh.vertices[b] - mesh.vertices[f[i]];
      vertex_angle[f[i]] +=
          std::atan2(u.cross(w).norm(), u.dot(w));
    }
  }
  for (const Edge& e : edges) {
    if (e.faces[1] < 0) {
      vertex_boundary[e.v0] = 1;
      vertex_boundary[e.v1] = 1;
    }
  }
}

}  // namespace geofeat
