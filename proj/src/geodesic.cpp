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

#include "geofeat/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "geofeat/error.hpp"
#include "geofeat/rng.hpp"

namespace geofeat {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 6.283185307179586;
// Windows narrower than this are dropped and interval ends closer than this
// are merged (meters).
constexpr double kWindowTol = 1e-9;
// A new window must beat an existing one by more than this to replace it.
constexpr double kCompareTol = 1e-12;
constexpr double kBaryEps = 1e-12;

using Vec2d = Eigen::Vector2d;

double cross2(const Vec2d& a, const Vec2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// An interval [b0, b1] of an edge (measured from the edge's lower-index
// vertex) whose distances come from one unfolded pseudo-source at
// (sx, -sy) in the edge frame, at geodesic offset sigma. The window carries
// paths into `face`.
struct Window {
  double b0, b1;
  double sx, sy;
  double sigma;
  int face;
  int id;
  bool pending;

  double dist(double x) const { return sigma + std::hypot(x - sx, sy); }
  double min_dist() const {
    if (sx < b0) return dist(b0);
    if (sx > b1) return dist(b1);
    return sigma + sy;
  }
};

struct Event {
  double key;
  int kind;  // 0 = window, 1 = vertex pseudo-source
  int index;  // edge or vertex
  int id;
  bool operator>(const Event& o) const {
    if (key != o.key) return key > o.key;
    if (kind != o.kind) return kind > o.kind;
    return id > o.id;
  }
};

// Roots of sigma1 + |x - a1, h1| = sigma2 + |x - a2, h2| (candidates only;
// callers re-evaluate).
void equal_distance_roots(const Window& p, const Window& q,
                          std::vector<double>* out) {
  const double a1 = p.sx, h1 = p.sy, a2 = q.sx, h2 = q.sy;
  const double d = q.sigma - p.sigma;
  const double alpha = 2.0 * (a2 - a1);
  const double beta = a1 * a1 - a2 * a2 + h1 * h1 - h2 * h2 - d * d;
  if (std::abs(d) < 1e-15) {
    if (std::abs(alpha) > 1e-15) out->push_back(-beta / alpha);
    return;
  }
  const double qa = alpha * alpha - 4.0 * d * d;
  const double qb = 2.0 * alpha * beta + 8.0 * d * d * a2;
  const double qc = beta * beta - 4.0 * d * d * (a2 * a2 + h2 * h2);
  if (std::abs(qa) < 1e-15) {
    if (std::abs(qb) > 1e-15) out->push_back(-qc / qb);
    return;
  }
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) return;
  const double sq = std::sqrt(disc);
  // Numerically stable pair.
  const double t = -0.5 * (qb + std::copysign(sq, qb));
  if (t != 0.0) out->push_back(qc / t);
  out->push_back(t / qa);
}

class ExactPropagation {
 public:
  ExactPropagation(const TriangleMesh& mesh, const MeshTopology& topo)
      : mesh_(mesh),
        topo_(topo),
        windows_(topo.edges.size()),
        dist_(mesh.vertices.size(), kInf) {}

  std::vector<double> run(const SurfacePoint& source) {
    seed_source(source);
    while (!queue_.empty()) {
      const Event ev = queue_.top();
      queue_.pop();
      if (ev.kind == 1) {
        if (ev.key == dist_[ev.index]) emit_vertex_source(ev.index, ev.key);
        continue;
      }
      auto& list = windows_[ev.index];
      auto it = std::find_if(list.begin(), list.end(),
                             [&](const Window& w) { return w.id == ev.id; });
      if (it == list.end() || !it->pending) continue;
      it->pending = false;
      const Window w = *it;
      propagate(ev.index, w);
    }
    for (double d : dist_) {
      if (!std::isfinite(d)) throw_data("geodesic: unreachable vertex");
    }
    return dist_;
  }

 private:
  bool is_pseudo_source_candidate(int v) const {
    return topo_.vertex_boundary[v] ||
           topo_.vertex_angle[v] >= kTwoPi - 1e-6;
  }

  void update_vertex(int v, double d) {
    if (d < dist_[v] - kCompareTol) {
      dist_[v] = d;
      if (is_pseudo_source_candidate(v)) {
        queue_.push({d, 1, v, next_id_++});
      }
    }
  }

  // Pseudo-source position of point `p` in the frame of edge `e`.
  void edge_frame(int e, const Vec3& p, double* x, double* y) const {
    const auto& edge = topo_.edges[e];
    const Vec3& p0 = mesh_.vertices[edge.v0];
    const Vec3 dir = (mesh_.vertices[edge.v1] - p0) / edge.length;
    const Vec3 rel = p - p0;
    *x = rel.dot(dir);
    *y = (rel - *x * dir).norm();
  }

  // Whole-edge window seeded from a point lying on the `from_face` side.
  void seed_edge(int e, int from_face, const Vec3& p, double sigma) {
    Window w;
    w.b0 = 0.0;
    w.b1 = topo_.edges[e].length;
    edge_frame(e, p, &w.sx, &w.sy);
    w.sigma = sigma;
    w.face = topo_.other_face(e, from_face);
    insert(e, w);
  }

  void emit_vertex_source(int v, double sigma) {
    const Vec3& p = mesh_.vertices[v];
    for (int f : topo_.vertex_faces[v]) {
      const Face& fv = mesh_.faces[f];
      const int corner = fv[0] == v ? 0 : (fv[1] == v ? 1 : 2);
      seed_edge(topo_.face_edges[f][corner], f, p, sigma);
    }
  }

  void seed_source(const SurfacePoint& sp) {
    const Face& fv = mesh_.faces[sp.face];
    for (int i = 0; i < 3; ++i) {
      if (sp.bary[i] >= 1.0 - kBaryEps) {
        dist_[fv[i]] = 0.0;
        emit_vertex_source(fv[i], 0.0);
        return;
      }
    }
    const Vec3 p = sp.bary[0] * mesh_.vertices[fv[0]] +
                   sp.bary[1] * mesh_.vertices[fv[1]] +
                   sp.bary[2] * mesh_.vertices[fv[2]];
    for (int i = 0; i < 3; ++i) {
      if (sp.bary[i] <= kBaryEps) {
        // On the edge opposite corner i: seed both faces sharing it.
        const int shared = topo_.face_edges[sp.face][i];
        for (int f : topo_.edges[shared].faces) {
          if (f < 0) continue;
          for (int e : topo_.face_edges[f]) {
            if (e != shared) seed_edge(e, f, p, 0.0);
          }
        }
        return;
      }
    }
    for (int e : topo_.face_edges[sp.face]) seed_edge(e, sp.face, p, 0.0);
  }

  void push_window(int edge, Window* w) {
    w->id = next_id_++;
    w->pending = w->face >= 0;
    if (w->pending) queue_.push({w->min_dist(), 0, edge, w->id});
  }

  // Adds `w` to the edge, keeping for every edge point only the window with
  // the smallest distance.
  void insert(int edge, Window w) {
    const double len = topo_.edges[edge].length;
    w.b0 = std::max(0.0, w.b0);
    w.b1 = std::min(len, w.b1);
    if (w.b0 <= kWindowTol) update_vertex(topo_.edges[edge].v0, w.dist(0.0));
    if (w.b1 >= len - kWindowTol) {
      update_vertex(topo_.edges[edge].v1, w.dist(len));
    }
    if (w.b1 - w.b0 < kWindowTol) return;

    auto& list = windows_[edge];
    std::vector<double> cuts = {w.b0, w.b1};
    std::vector<int> overlapping;
    for (int i = 0; i < static_cast<int>(list.size()); ++i) {
      const Window& e = list[i];
      if (e.b1 <= w.b0 || e.b0 >= w.b1) continue;
      overlapping.push_back(i);
      const double lo = std::max(e.b0, w.b0);
      const double hi = std::min(e.b1, w.b1);
      cuts.push_back(lo);
      cuts.push_back(hi);
      std::vector<double> roots;
      equal_distance_roots(w, e, &roots);
      for (double r : roots) {
        if (r > lo && r < hi) cuts.push_back(r);
      }
    }
    std::sort(cuts.begin(), cuts.end());

    // Sub-intervals where the new window wins.
    std::vector<std::pair<double, double>> wins;
    size_t cursor = 0;
    for (size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double lo = cuts[c], hi = cuts[c + 1];
      if (hi - lo <= 0.0) continue;
      const double mid = 0.5 * (lo + hi);
      bool better = true;
      while (cursor < overlapping.size() && list[overlapping[cursor]].b1 <= mid) {
        ++cursor;
      }
      if (cursor < overlapping.size()) {
        const Window& e = list[overlapping[cursor]];
        if (e.b0 <= mid && mid <= e.b1) {
          better = w.dist(mid) < e.dist(mid) - kCompareTol;
        }
      }
      if (!better) continue;
      if (!wins.empty() && wins.back().second >= lo) {
        wins.back().second = hi;
      } else {
        wins.emplace_back(lo, hi);
      }
    }
    wins.erase(std::remove_if(wins.begin(), wins.end(),
                              [](const auto& r) {
                                return r.second - r.first < kWindowTol;
                              }),
               wins.end());
    if (wins.empty()) return;

    std::vector<Window> next;
    next.reserve(list.size() + wins.size() + 2);
    std::vector<char> is_overlapping(list.size(), 0);
    for (int i : overlapping) is_overlapping[i] = 1;
    for (size_t i = 0; i < list.size(); ++i) {
      const Window& e = list[i];
      if (!is_overlapping[i]) {
        next.push_back(e);
        continue;
      }
      // Subtract every winning range from the existing window.
      std::vector<std::pair<double, double>> keep = {{e.b0, e.b1}};
      for (const auto& [lo, hi] : wins) {
        std::vector<std::pair<double, double>> rest;
        for (const auto& [a, b] : keep) {
          if (hi <= a || lo >= b) {
            rest.emplace_back(a, b);
            continue;
          }
          if (lo > a) rest.emplace_back(a, lo);
          if (hi < b) rest.emplace_back(hi, b);
        }
        keep = std::move(rest);
      }
      const bool changed = !(keep.size() == 1 && keep[0].first == e.b0 &&
                             keep[0].second == e.b1);
      for (const auto& [a, b] : keep) {
        if (b - a < kWindowTol) continue;
        Window piece = e;
        piece.b0 = a;
        piece.b1 = b;
        if (changed && e.pending) push_window(edge, &piece);
        next.push_back(piece);
      }
    }
    for (const auto& [lo, hi] : wins) {
      Window piece = w;
      piece.b0 = lo;
      piece.b1 = hi;
      push_window(edge, &piece);
      next.push_back(piece);
    }
    std::sort(next.begin(), next.end(),
              [](const Window& a, const Window& b) { return a.b0 < b.b0; });
    list = std::move(next);
  }

  // Unfolds the window's pseudo-source across `w.face` onto its two far
  // edges.
  void propagate(int edge, const Window& w) {
    const auto& e = topo_.edges[edge];
    const int f = w.face;
    const Face& fv = mesh_.faces[f];
    int edge_a = -1, edge_b = -1;  // (v0, c) and (v1, c)
    for (int i = 0; i < 3; ++i) {
      if (fv[i] == e.v1) edge_a = topo_.face_edges[f][i];
      if (fv[i] == e.v0) edge_b = topo_.face_edges[f][i];
    }
    const double len = e.length;
    const double la = topo_.edges[edge_a].length;
    const double lb = topo_.edges[edge_b].length;
    if (w.sy < 1e-12 * len) return;  // grazing: the cone has no interior

    const double cx = (len * len + la * la - lb * lb) / (2.0 * len);
    const double cy = std::sqrt(std::max(la * la - cx * cx, 0.0));
    const Vec2d p_v0(0.0, 0.0), p_v1(len, 0.0), p_c(cx, cy);
    const Vec2d src(w.sx, -w.sy);
    const double xc = w.sx + (cx - w.sx) * w.sy / (cy + w.sy);

    // Parameter in [0,1] along q0->q1 where the ray src->(x,0) crosses it.
    auto hit = [&](double x, const Vec2d& q0, const Vec2d& q1) {
      const Vec2d d(x - w.sx, w.sy);
      const Vec2d seg = q1 - q0;
      const double denom = cross2(seg, d);
      if (std::abs(denom) < 1e-300) return 0.0;
      const double mu = cross2(d, q0 - src) / denom;
      return std::clamp(mu, 0.0, 1.0);
    };

    auto emit = [&](int target, int from_vertex, const Vec2d& q0,
                    const Vec2d& q1, double mu0, double mu1) {
      const auto& te = topo_.edges[target];
      const double tlen = te.length;
      // Orient the target edge frame from its lower-index vertex.
      const bool forward = te.v0 == from_vertex;
      const Vec2d a = forward ? q0 : q1;
      const Vec2d b = forward ? q1 : q0;
      if (!forward) {
        mu0 = 1.0 - mu0;
        mu1 = 1.0 - mu1;
      }
      const Vec2d dir = (b - a) / tlen;
      const Vec2d rel = src - a;
      Window nw;
      nw.b0 = std::min(mu0, mu1) * tlen;
      nw.b1 = std::max(mu0, mu1) * tlen;
      nw.sx = rel.dot(dir);
      nw.sy = std::abs(cross2(dir, rel));
      nw.sigma = w.sigma;
      nw.face = topo_.other_face(target, f);
      insert(target, nw);
    };

    if (w.b0 < xc) {
      const double hi = std::min(w.b1, xc);
      const double mu0 = hit(w.b0, p_v0, p_c);
      const double mu1 = (xc <= w.b1) ? 1.0 : hit(hi, p_v0, p_c);
      emit(edge_a, e.v0, p_v0, p_c, mu0, mu1);
    }
    if (w.b1 > xc) {
      const double mu0 = (xc >= w.b0) ? 1.0 : hit(w.b0, p_v1, p_c);
      const double mu1 = hit(w.b1, p_v1, p_c);
      emit(edge_b, e.v1, p_v1, p_c, mu0, mu1);
    }
  }

  const TriangleMesh& mesh_;
  const MeshTopology& topo_;
  std::vector<std::vector<Window>> windows_;
  std::vector<double> dist_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  int next_id_ = 0;
};

GeodesicField make_field(const TriangleMesh& mesh,
                         const std::shared_ptr<const std::vector<Face>>& faces,
                         const SurfacePoint& source) {
  GeodesicField field;
  field.source = source;
  field.faces = faces;
  const Face& f = mesh.faces[source.face];
  for (int i = 0; i < 3; ++i) field.source_corners[i] = mesh.vertices[f[i]];
  return field;
}

}  // namespace

GeodesicSolver::GeodesicSolver(TriangleMesh mesh)
    : mesh_(std::move(mesh)),
      topo_(mesh_),
      faces_(std::make_shared<const std::vector<Face>>(mesh_.faces)) {}

GeodesicField GeodesicSolver::exact(const SurfacePoint& source) const {
  check_surface_point(mesh_, source);
  GeodesicField field = make_field(mesh_, faces_, source);
  field.method = GeodesicMethod::kExact;
  ExactPropagation prop(mesh_, topo_);
  field.distance = prop.run(source);
  return field;
}

GeodesicField GeodesicSolver::graph(const SurfacePoint& source,
                                    int steiner_k) const {
  check_surface_point(mesh_, source);
  if (steiner_k < 0) throw_usage("steiner_k must be >= 0");
  GeodesicField field = make_field(mesh_, faces_, source);
  field.method = GeodesicMethod::kGraph;
  field.steiner_k = steiner_k;

  const int nv = mesh_.vertex_count();
  const int ne = static_cast<int>(topo_.edges.size());
  const int k = steiner_k;
  const int source_node = nv + ne * k;
  const int node_count = source_node + 1;

  auto position = [&](int node) -> Vec3 {
    if (node < nv) return mesh_.vertices[node];
    if (node == source_node) return surface_point_position(mesh_, source);
    const int e = (node - nv) / k;
    const int j = (node - nv) % k + 1;
    const auto& edge = topo_.edges[e];
    const double t = static_cast<double>(j) / (k + 1);
    return (1.0 - t) * mesh_.vertices[edge.v0] + t * mesh_.vertices[edge.v1];
  };
  std::vector<Vec3> pos(node_count);
  for (int n = 0; n < node_count; ++n) pos[n] = position(n);

  auto face_nodes = [&](int f, std::vector<int>* out) {
    out->clear();
    for (int v : mesh_.faces[f]) out->push_back(v);
    for (int e : topo_.face_edges[f]) {
      for (int j = 0; j < k; ++j) out->push_back(nv + e * k + j);
    }
  };
  auto incident_faces = [&](int node, std::vector<int>* out) {
    out->clear();
    if (node < nv) {
      *out = topo_.vertex_faces[node];
    } else if (node == source_node) {
      out->push_back(source.face);
    } else {
      for (int f : topo_.edges[(node - nv) / k].faces) {
        if (f >= 0) out->push_back(f);
      }
    }
  };

  std::vector<double> dist(node_count, kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> queue;
  dist[source_node] = 0.0;
  queue.push({0.0, source_node});
  std::vector<int> faces, nodes;
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    incident_faces(u, &faces);
    for (int f : faces) {
      face_nodes(f, &nodes);
      for (int v : nodes) {
        const double nd = d + (pos[u] - pos[v]).norm();
        if (nd < dist[v]) {
          dist[v] = nd;
          queue.push({nd, v});
        }
      }
    }
  }
  field.distance.assign(dist.begin(), dist.begin() + nv);
  for (double d : field.distance) {
    if (!std::isfinite(d)) throw_data("geodesic: unreachable vertex");
  }
  return field;
}

GeodesicField geodesic_field_exact(const TriangleMesh& mesh,
                                   const SurfacePoint& source) {
  return GeodesicSolver(mesh).exact(source);
}

GeodesicField geodesic_field_graph(const TriangleMesh& mesh,
                                   const SurfacePoint& source, int steiner_k) {
  return GeodesicSolver(mesh).graph(source, steiner_k);
}

double geodesic_distance(const GeodesicField& field,
                         const SurfacePoint& target) {
  if (!field.faces || target.face < 0 ||
      target.face >= static_cast<int>(field.faces->size())) {
    throw_data("geodesic target face index out of range");
  }
  if (target.face == field.source.face) {
    Vec3 a = Vec3::Zero(), b = Vec3::Zero();
    for (int i = 0; i < 3; ++i) {
      a += field.source.bary[i] * field.source_corners[i];
      b += target.bary[i] * field.source_corners[i];
    }
    return (a - b).norm();
  }
  const Face& f = (*field.faces)[target.face];
  return target.bary[0] * field.distance[f[0]] +
         target.bary[1] * field.distance[f[1]] +
         target.bary[2] * field.distance[f[2]];
}

double geodesic_diameter(const GeodesicSolver& solver, int n_samples,
                         std::uint64_t seed) {
  if (n_samples < 1) throw_usage("geodesic_diameter needs n_samples >= 1");
  Rng rng(seed, "geodesic_diameter");
  const TriangleMesh& mesh = solver.mesh();
  double best = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    const int v = static_cast<int>(rng.below(mesh.vertex_count()));
    const GeodesicField field = solver.exact(vertex_surface_point(mesh, v));
    for (double d : field.distance) best = std::max(best, d);
  }
  return best;
}

double geodesic_diameter(const TriangleMesh& mesh, int n_samples,
                         std::uint64_t seed) {
  return geodesic_diameter(GeodesicSolver(mesh), n_samples, seed);
}

}  // namespace geofeat
