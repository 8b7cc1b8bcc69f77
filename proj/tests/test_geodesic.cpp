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

#include <chrono>
#include <cmath>

#include "doctest.h"
#include "geofeat/geodesic.hpp"
#include "geofeat/rng.hpp"

using namespace geofeat;

namespace {

// Icosphere with radial noise: plenty of saddle vertices for the exact
// solver to route around.
TriangleMesh bumpy_sphere(int subdiv, std::uint64_t seed) {
  TriangleMesh m = make_icosphere(subdiv, 1.0);
  Rng rng(seed, "bumpy");
  for (Vec3& v : m.vertices) v *= rng.uniform(0.8, 1.2);
  return m;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("exact geodesics on a flat grid equal Euclidean distances") {
  const TriangleMesh grid = make_grid(10, 10, 1.0, 1.0);
  const GeodesicSolver solver(grid);
  const GeodesicField corner = solver.exact(vertex_surface_point(grid, 0));
  CHECK(corner.distance[120] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  double worst = 0.0;
  for (int v = 0; v < grid.vertex_count(); ++v) {
    worst = std::max(worst, std::abs(corner.distance[v] - grid.vertices[v].norm()));
  }
  CHECK(worst < 1e-6);

  // Face-interior source.
  const SurfacePoint interior{57, {0.2, 0.3, 0.5}};
  const Vec3 p = surface_point_position(grid, interior);
  const GeodesicField f = solver.exact(interior);
  worst = 0.0;
  for (int v = 0; v < grid.vertex_count(); ++v) {
    worst = std::max(worst, std::abs(f.distance[v] - (grid.vertices[v] - p).norm()));
  }
  CHECK(worst < 1e-6);

  // Source on an edge between two faces.
  const SurfacePoint on_edge{40, {0.5, 0.0, 0.5}};
  const Vec3 q = surface_point_position(grid, on_edge);
  const GeodesicField g = solver.exact(on_edge);
  worst = 0.0;
  for (int v = 0; v < grid.vertex_count(); ++v) {
    worst = std::max(worst, std::abs(g.distance[v] - (grid.vertices[v] - q).norm()));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("exact geodesic on the unit icosphere reaches the antipode at pi") {
  const auto start = std::chrono::steady_clock::now();
  const TriangleMesh sphere = make_icosphere(4, 1.0);
  const GeodesicSolver solver(sphere);
  // Vertices 0 and 3 of the base icosahedron are antipodal.
  CHECK((sphere.vertices[0] + sphere.vertices[3]).norm() < 1e-12);
  const GeodesicField exact = solver.exact(vertex_surface_point(sphere, 0));
  CHECK(std::abs(exact.distance[3] - M_PI) < 0.01 * M_PI);
  const GeodesicField graph = solver.graph(vertex_surface_point(sphere, 0), 8);
  CHECK(std::abs(graph.distance[3] - exact.distance[3]) <
        0.005 * exact.distance[3]);
  const double seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  MESSAGE("icosphere(4) exact+graph seconds: " << seconds);
}

TEST_CASE("graph distances bound the exact ones and shrink with k") {
  const TriangleMesh m = bumpy_sphere(2, 3);
  const GeodesicSolver solver(m);
  const SurfacePoint src{17, {0.3, 0.3, 0.4}};
  const GeodesicField exact = solver.exact(src);
  std::vector<double> prev;
  for (int k : {0, 2, 8}) {
    const GeodesicField g = solver.graph(src, k);
    for (int v = 0; v < m.vertex_count(); ++v) {
      CHECK(g.distance[v] >= exact.distance[v] - 1e-9);
      if (!prev.empty()) CHECK(g.distance[v] <= prev[v] + 1e-12);
    }
    prev = g.distance;
  }
  // k = 4 is not a refinement of k = 2, but it must still improve on k = 0.
  const GeodesicField g0 = solver.graph(src, 0);
  const GeodesicField g4 = solver.graph(src, 4);
  for (int v = 0; v < m.vertex_count(); ++v) {
    CHECK(g4.distance[v] <= g0.distance[v] + 1e-12);
  }
}

TEST_CASE("graph on a flat grid overestimates the diagonal") {
  const TriangleMesh grid = make_grid(10, 10, 1.0, 1.0);
  const GeodesicSolver solver(grid);
  const auto exact = solver.exact(vertex_surface_point(grid, 0));
  const auto g0 = solver.graph(vertex_surface_point(grid, 0), 0);
  // Vertex (3,1): not reachable along a straight edge chain.
  const int v = 1 * 11 + 3;
  CHECK(g0.distance[v] > exact.distance[v] + 1e-3);
  for (int i = 0; i < grid.vertex_count(); ++i) {
    CHECK(g0.distance[i] >= exact.distance[i] - 1e-12);
  }
}

TEST_CASE("exact geodesic metric properties on a bumpy sphere") {
  const TriangleMesh m = bumpy_sphere(2, 11);
  const GeodesicSolver solver(m);
  Rng rng(5, "pairs");
  std::vector<int> picks;
  for (int i = 0; i < 8; ++i) picks.push_back(static_cast<int>(rng.below(m.vertex_count())));
  std::vector<GeodesicField> fields;
  for (int v : picks) fields.push_back(solver.exact(vertex_surface_point(m, v)));
  for (size_t a = 0; a < picks.size(); ++a) {
    for (size_t b = 0; b < picks.size(); ++b) {
      const double ab = fields[a].distance[picks[b]];
      const double ba = fields[b].distance[picks[a]];
      CHECK(std::abs(ab - ba) <= 1e-6 * std::max(ab, 1e-12) + 1e-12);
      CHECK(ab >= (m.vertices[picks[a]] - m.vertices[picks[b]]).norm() - 1e-12);
      for (size_t c = 0; c < picks.size(); ++c) {
        const double ac = fields[a].distance[picks[c]];
        const double bc = fields[b].distance[picks[c]];
        CHECK(ac <= ab + bc + 1e-9);
      }
    }
  }
  // Sources never sit farther than a face's longest edge from its corners.
  const SurfacePoint src{100, {0.2, 0.5, 0.3}};
  const auto f = solver.exact(src);
  for (int c : m.faces[100]) CHECK(f.distance[c] <= longest_edge(m, 100));
}

TEST_CASE("geodesic_distance interpolates and is exact at the source") {
  const TriangleMesh grid = make_grid(10, 10, 1.0, 1.0);
  const GeodesicSolver solver(grid);
  const SurfacePoint src{57, {0.2, 0.3, 0.5}};
  const auto field = solver.exact(src);
  CHECK(geodesic_distance(field, src) == 0.0);
  const SurfacePoint at_vertex{3, {0.0, 1.0, 0.0}};
  CHECK(geodesic_distance(field, at_vertex) ==
        field.distance[grid.faces[3][1]]);

  // Target (0.3, 0.4) from the corner: analytic 0.5.
  const auto corner = solver.exact(vertex_surface_point(grid, 0));
  // Cell (3,4) lower triangle has corners (0.3,0.4),(0.4,0.4),(0.4,0.5).
  const int face = 2 * (4 * 10 + 3);
  const SurfacePoint target{face, {0.7, 0.2, 0.1}};
  const Vec3 p = surface_point_position(grid, target);
  CHECK(std::abs(geodesic_distance(corner, target) - p.norm()) < 0.02 * 0.1);
  const SurfacePoint exact_point{face, {1.0, 0.0, 0.0}};
  CHECK(geodesic_distance(corner, exact_point) ==
        doctest::Approx(0.5).epsilon(1e-8));

  CHECK_THROWS(geodesic_distance(field, {9999, {1, 0, 0}}));
}

TEST_CASE("geodesic_diameter") {
  const TriangleMesh grid = make_grid(10, 10, 1.0, 1.0);
  CHECK(geodesic_diameter(grid, 4, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
  const TriangleMesh sphere = make_icosphere(3, 1.0);
  CHECK(std::abs(geodesic_diameter(sphere, 8, 2) - M_PI) < 0.02 * M_PI);
  TriangleMesh tri;
  tri.vertices = {{0, 0, 0}, {3, 0, 0}, {0, 4, 0}};
  tri.faces = {{0, 1, 2}};
  CHECK(geodesic_diameter(tri, 3, 0) == doctest::Approx(5.0));
  CHECK(geodesic_diameter(sphere, 8, 2) == geodesic_diameter(sphere, 8, 2));
}
