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

#ifndef GEOFEAT_GEODESIC_HPP_
#define GEOFEAT_GEODESIC_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "geofeat/mesh.hpp"

namespace geofeat {

enum class GeodesicMethod { kExact, kGraph };

// Single-source distance field sampled at the mesh vertices.
struct GeodesicField {
  SurfacePoint source;
  std::vector<double> distance;  // per vertex, meters
  GeodesicMethod method = GeodesicMethod::kExact;
  int steiner_k = 0;             // graph method only
  // Corners of the source face; lets same-face queries use the straight
  // segment without holding on to the mesh.
  std::array<Vec3, 3> source_corners;
  std::shared_ptr<const std::vector<Face>> faces;
};

// Reusable solver over one mesh. Topology is built once; each query is a
// pure function of the source point, so a const solver may be shared by
// several threads.
class GeodesicSolver {
 public:
  explicit GeodesicSolver(TriangleMesh mesh);

  // Exact polyhedral distances by continuous Dijkstra window propagation.
  GeodesicField exact(const SurfacePoint& source) const;
  // Shortest paths on vertices plus `steiner_k` evenly spaced points per
  // edge, with every pair of points on a face boundary connected. An upper
  // bound on the exact distance.
  GeodesicField graph(const SurfacePoint& source, int steiner_k) const;

  const TriangleMesh& mesh() const { return mesh_; }
  const MeshTopology& topology() const { return topo_; }

 private:
  TriangleMesh mesh_;
  MeshTopology topo_;
  std::shared_ptr<const std::vector<Face>> faces_;
};

GeodesicField geodesic_field_exact(const TriangleMesh& mesh,
                                   const SurfacePoint& source);
GeodesicField geodesic_field_graph(const TriangleMesh& mesh,
                                   const SurfacePoint& source, int steiner_k);

// Distance from the field's source to `target`. Targets on the source face
// use the straight in-face segment (exact, and 0 at the source itself);
// everything else interpolates the vertex distances barycentrically.
double geodesic_distance(const GeodesicField& field,
                         const SurfacePoint& target);

// Max over `n_samples` random source vertices of the farthest vertex
// distance (exact method).
double geodesic_diameter(const TriangleMesh& mesh, int n_samples,
                         std::uint64_t seed);
double geodesic_diameter(const GeodesicSolver& solver, int n_samples,
                         std::uint64_t seed);

}  // namespace geofeat

#endif  // GEOFEAT_GEODESIC_HPP_
