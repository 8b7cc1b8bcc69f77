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

#ifndef GEOFEAT_MESH_HPP_
#define GEOFEAT_MESH_HPP_

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

namespace geofeat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

// Triangle mesh in meters. `uv`, when present, holds one texture coordinate
// per face corner (so seams need no vertex duplication).
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<std::array<Vec2, 3>> uv;

  bool has_uv() const { return !uv.empty(); }
  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int face_count() const { return static_cast<int>(faces.size()); }
};

// A point on the surface: face index plus barycentric weights of its corners.
struct SurfacePoint {
  int face = -1;
  std::array<double, 3> bary{1.0, 0.0, 0.0};

  friend bool operator==(const SurfacePoint& a, const SurfacePoint& b) {
    return a.face == b.face && a.bary == b.bary;
  }
};

inline constexpr double kMinFaceArea = 1e-12;
inline constexpr double kBaryTolerance = 1e-9;

// Throws a data error unless every index is in range, no face is degenerate,
// every edge has at most two faces, and the mesh is a single component.
void validate_mesh(const TriangleMesh& mesh);

TriangleMesh parse_mesh(const std::string& text);
TriangleMesh load_mesh(const std::string& path);
std::string format_mesh(const TriangleMesh& mesh);
void save_mesh(const TriangleMesh& mesh, const std::string& path);

double face_area(const TriangleMesh& mesh, int face);
double longest_edge(const TriangleMesh& mesh, int face);
int count_components(const TriangleMesh& mesh);

// Throws a data error for an invalid face index or barycentric triple.
void check_surface_point(const TriangleMesh& mesh, const SurfacePoint& sp);
Vec3 surface_point_position(const TriangleMesh& mesh, const SurfacePoint& sp);
// Surface point sitting exactly on vertex `v` (first incident face).
SurfacePoint vertex_surface_point(const TriangleMesh& mesh, int v);

// Fixtures.
TriangleMesh make_icosphere(int subdivisions, double radius);
// Flat grid of nx-by-ny quads covering [0,sx]x[0,sy] in the z=0 plane.
TriangleMesh make_grid(int nx, int ny, double sx, double sy);

// Edge/face incidence used by the geodesic solvers.
struct MeshTopology {
  struct Edge {
    int v0, v1;              // v0 < v1
    std::array<int, 2> faces;  // -1 when missing (boundary)
    double length;
  };
  std::vector<Edge> edges;
  std::vector<std::array<int, 3>> face_edges;  // edge opposite corner i
  std::vector<std::vector<int>> vertex_faces;
  std::vector<std::vector<int>> vertex_edges;
  std::vector<double> vertex_angle;  // sum of incident corner angles
  std::vector<char> vertex_boundary;

  explicit MeshTopology(const TriangleMesh& mesh);
  int other_face(int edge, int face) const {
    const auto& f = edges[edge].faces;
    return f[0] == face ? f[1] : f[0];
  }
};

}  // namespace geofeat

#endif  // GEOFEAT_MESH_HPP_
