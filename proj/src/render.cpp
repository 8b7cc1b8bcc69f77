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

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "geofeat/error.hpp"
#include "geofeat/synth.hpp"

namespace geofeat {
namespace {

constexpr float kInf = std::numeric_limits<float>::infinity();
constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();

Vec3 sample_bilinear(const FloatImage& tex, double u, double v) {
  const double x = std::clamp(u * tex.width - 0.5, 0.0, tex.width - 1.0);
  const double y = std::clamp(v * tex.height - 0.5, 0.0, tex.height - 1.0);
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, tex.width - 1);
  const int y1 = std::min(y0 + 1, tex.height - 1);
  const double tx = x - x0, ty = y - y0;
  Vec3 out;
  for (int c = 0; c < 3; ++c)
    out[c] = (1 - ty) * ((1 - tx) * tex.at(x0, y0, c) + tx * tex.at(x1, y0, c)) +
             ty * ((1 - tx) * tex.at(x0, y1, c) + tx * tex.at(x1, y1, c));
  return out;
}

double edge_fn(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

// Depth along the camera ray through sub-pixel (x, y) where it meets the
// plane of `face`; NaN when the ray is parallel to the plane.
double plane_depth(const TriangleMesh& mesh, const Camera& cam, int face,
                   double x, double y) {
  const Vec3 a = cam.to_camera(mesh.vertices[mesh.faces[face][0]]);
  const Vec3 b = cam.to_camera(mesh.vertices[mesh.faces[face][1]]);
  const Vec3 c = cam.to_camera(mesh.vertices[mesh.faces[face][2]]);
  const Vec3 n = (b - a).cross(c - a);
  const Vec3 ray((x - cam.cx) / cam.focal, (y - cam.cy) / cam.focal, 1.0);
  const double denom = n.dot(ray);
  if (std::fabs(denom) < 1e-14 * n.norm()) return std::nan("");
  return n.dot(a) / denom;
}

}  // namespace

SurfacePoint RenderedView::surface_point(int x, int y) const {
  SurfacePoint sp;
  sp.face = face.at(x, y);
  if (sp.face < 0) return sp;
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) sum += bary.at(x, y, i);
  for (int i = 0; i < 3; ++i) sp.bary[i] = bary.at(x, y, i) / sum;
  return sp;
}

RenderedView rasterize(std::shared_ptr<const TriangleMesh> mesh_ptr,
                       const FloatImage& texture, const Camera& cam) {
  const TriangleMesh& mesh = *mesh_ptr;
  if (!mesh.has_uv()) throw_usage("rasterize needs a mesh with uv coordinates");
  if (texture.channels != 3) throw_usage("texture must be RGB");
  const int w = cam.width, h = cam.height;
  RenderedView view;
  view.camera = cam;
  view.mesh = mesh_ptr;
  view.face = Raster<int>(w, h, 1, -1);
  view.bary = FloatImage(w, h, 3, 0.0f);
  view.depth = FloatImage(w, h, 1, kInf);
  view.rgb = FloatImage(w, h, 3, 0.0f);
  std::vector<double> zbuf(static_cast<size_t>(w) * h,
                           std::numeric_limits<double>::infinity());
  std::vector<std::array<double, 3>> bbuf(static_cast<size_t>(w) * h);

  std::vector<Vec3> cam_pts(mesh.vertices.size());
  for (size_t v = 0; v < cam_pts.size(); ++v)
    cam_pts[v] = cam.to_camera(mesh.vertices[v]);
  constexpr double kNear = 1e-6;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Face& fc = mesh.faces[f];
    std::array<Vec2, 3> s;
    std::array<double, 3> z;
    bool behind = false;
    for (int i = 0; i < 3; ++i) {
      const Vec3& p = cam_pts[fc[i]];
      if (p.z() <= kNear) behind = true;
      z[i] = p.z();
      s[i] = Vec2(cam.focal * p.x() / p.z() + cam.cx,
                  cam.focal * p.y() / p.z() + cam.cy);
    }
    if (behind) continue;
    const double area = edge_fn(s[0], s[1], s[2]);
    if (std::fabs(area) < 1e-12) continue;
    const double min_x = std::min({s[0].x(), s[1].x(), s[2].x()});
    const double max_x = std::max({s[0].x(), s[1].x(), s[2].x()});
    const double min_y = std::min({s[0].y(), s[1].y(), s[2].y()});
    const double max_y = std::max({s[0].y(), s[1].y(), s[2].y()});
    const int x0 = std::max(0, static_cast<int>(std::ceil(min_x)));
    const int x1 = std::min(w - 1, static_cast<int>(std::floor(max_x)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(min_y)));
    const int y1 = std::min(h - 1, static_cast<int>(std::floor(max_y)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const Vec2 p(x, y);
        const double l0 = edge_fn(s[1], s[2], p) / area;
        const double l1 = edge_fn(s[2], s[0], p) / area;
        const double l2 = edge_fn(s[0], s[1], p) / area;
        if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;
        const double q0 = l0 / z[0], q1 = l1 / z[1], q2 = l2 / z[2];
        const double sum = q0 + q1 + q2;
        const double depth = 1.0 / sum;
        const size_t idx = static_cast<size_t>(y) * w + x;
        if (depth >= zbuf[idx]) continue;
        zbuf[idx] = depth;
        view.face.at(x, y) = f;
        bbuf[idx] = {q0 / sum, q1 / sum, q2 / sum};
      }
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int f = view.face.at(x, y);
      if (f < 0) continue;
      const size_t idx = static_cast<size_t>(y) * w + x;
      const auto& b = bbuf[idx];
      view.depth.at(x, y) = static_cast<float>(zbuf[idx]);
      Vec2 uv = Vec2::Zero();
      for (int i = 0; i < 3; ++i) {
        view.bary.at(x, y, i) = static_cast<float>(b[i]);
        uv += b[i] * mesh.uv[f][i];
      }
      const Vec3 rgb = sample_bilinear(texture, uv.x(), uv.y());
      for (int c = 0; c < 3; ++c) view.rgb.at(x, y, c) = static_cast<float>(rgb[c]);
    }
  return view;
}

CorrespondenceField correspondence_field(const RenderedView& src,
                                         const RenderedView& dst) {
  const TriangleMesh& dmesh = *dst.mesh;
  if (src.mesh->faces != dmesh.faces)
    throw_data("correspondence needs posed meshes with identical topology");
  const int w = src.width(), h = src.height();
  const int dw = dst.width(), dh = dst.height();
  CorrespondenceField out;
  out.target = FloatImage(w, h, 2, kNaN);
  out.valid = Raster<std::uint8_t>(w, h, 1, 0);
  out.visible = Raster<std::uint8_t>(w, h, 1, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!src.foreground(x, y)) continue;
      const SurfacePoint sp = src.surface_point(x, y);
      const Projection pr = project(dst.camera, surface_point_position(dmesh, sp));
      if (!pr.in_front()) continue;
      const long qx = std::lround(pr.x), qy = std::lround(pr.y);
      if (qx < 0 || qy < 0 || qx >= dw || qy >= dh) continue;
      out.target.at(x, y, 0) = static_cast<float>(pr.x);
      out.target.at(x, y, 1) = static_cast<float>(pr.y);
      out.valid.at(x, y) = 1;
      // Visible when one of the pixels around the sub-pixel target shows the
      // same face, or a face whose plane meets the ray at the same depth.
      const int fx = static_cast<int>(std::floor(pr.x));
      const int fy = static_cast<int>(std::floor(pr.y));
      bool visible = false;
      for (int dy = 0; dy <= 1 && !visible; ++dy)
        for (int dx = 0; dx <= 1 && !visible; ++dx) {
          const int cx = fx + dx, cy = fy + dy;
          if (!dst.face.inside(cx, cy)) continue;
          const int g = dst.face.at(cx, cy);
          if (g < 0) continue;
          if (g == sp.face) {
            visible = true;
            break;
          }
          const double d = plane_depth(dmesh, dst.camera, g, pr.x, pr.y);
          if (std::isfinite(d) &&
              std::fabs(d - pr.depth) <= kVisibilityDepthTolerance * pr.depth)
            visible = true;
        }
      out.visible.at(x, y) = visible ? 1 : 0;
    }
  return out;
}

FloatImage correspondence_to_flow(const CorrespondenceField& corr) {
  FloatImage flow(corr.width(), corr.height(), 2, kUnknownFlow);
  for (int y = 0; y < corr.height(); ++y)
    for (int x = 0; x < corr.width(); ++x) {
      if (!corr.valid.at(x, y)) continue;
      flow.at(x, y, 0) = corr.target.at(x, y, 0) - static_cast<float>(x);
      flow.at(x, y, 1) = corr.target.at(x, y, 1) - static_cast<float>(y);
    }
  return flow;
}

CorrespondenceField flow_to_correspondence(const FloatImage& flow,
                                           const Raster<std::uint8_t>& visible) {
  if (flow.channels != 2) throw_data("flow must have 2 channels");
  if (!flow.same_size(FloatImage(visible.width, visible.height, 1)))
    throw_data("flow and visibility mask sizes differ");
  CorrespondenceField out;
  const int w = flow.width, h = flow.height;
  out.target = FloatImage(w, h, 2, kNaN);
  out.valid = Raster<std::uint8_t>(w, h, 1, 0);
  out.visible = Raster<std::uint8_t>(w, h, 1, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float dx = flow.at(x, y, 0), dy = flow.at(x, y, 1);
      if (!(std::fabs(dx) < 1e9f && std::fabs(dy) < 1e9f)) continue;
      out.target.at(x, y, 0) = static_cast<float>(x) + dx;
      out.target.at(x, y, 1) = static_cast<float>(y) + dy;
      out.valid.at(x, y) = 1;
      out.visible.at(x, y) = visible.at(x, y) ? 1 : 0;
    }
  return out;
}

FloatImage geodesic_map(const RenderedView& view, const GeodesicField& field) {
  FloatImage out(view.width(), view.height(), 1, kNaN);
  for (int y = 0; y < view.height(); ++y)
    for (int x = 0; x < view.width(); ++x)
      if (view.foreground(x, y))
        out.at(x, y) =
            static_cast<float>(geodesic_distance(field, view.surface_point(x, y)));
  return out;
}

FloatImage geodesic_map(const RenderedView& view, int source_x, int source_y,
                        const FieldProvider& provider) {
  if (!view.face.inside(source_x, source_y) || !view.foreground(source_x, source_y))
    throw_usage("geodesic source pixel (" + std::to_string(source_x) + ", " +
                std::to_string(source_y) + ") is not on the foreground");
  return geodesic_map(view, provider(view.surface_point(source_x, source_y)));
}

Vec2 sample_correspondence(const CorrespondenceField& corr, double tx,
                           double ty, bool* ok,
                           const std::function<bool(int, int)>& accept) {
  const int x0 = static_cast<int>(std::floor(tx));
  const int y0 = static_cast<int>(std::floor(ty));
  const double fx = tx - x0, fy = ty - y0;
  std::array<Vec2, 4> pix, val;
  int n = 0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const int qx = x0 + dx, qy = y0 + dy;
      if (!corr.visible.inside(qx, qy) || !corr.visible.at(qx, qy)) continue;
      if (accept && !accept(qx, qy)) continue;
      pix[n] = Vec2(dx, dy);
      val[n] = Vec2(corr.target.at(qx, qy, 0), corr.target.at(qx, qy, 1));
      ++n;
    }
  *ok = n > 0;
  if (n == 4)
    return (1 - fy) * ((1 - fx) * val[0] + fx * val[1]) +
           fy * ((1 - fx) * val[2] + fx * val[3]);
  if (n == 3) {
    // Affine through the three samples; exact for locally affine fields.
    Eigen::Matrix2d m;
    m.col(0) = pix[1] - pix[0];
    m.col(1) = pix[2] - pix[0];
    const Vec2 w = m.inverse() * (Vec2(fx, fy) - pix[0]);
    return val[0] + w.x() * (val[1] - val[0]) + w.y() * (val[2] - val[0]);
  }
  if (n == 2) {
    const Vec2 d = pix[1] - pix[0];
    const double t = d.dot(Vec2(fx, fy) - pix[0]) / d.squaredNorm();
    return val[0] + t * (val[1] - val[0]);
  }
  return val[0];
}

CycleStats cycle_check(const RenderedView& v1, const RenderedView& v2,
                       const CorrespondenceField& c12,
                       const CorrespondenceField& c21, double tol_px) {
  const TriangleMesh& mesh = *v1.mesh;
  std::vector<std::vector<int>> vertex_faces(mesh.vertices.size());
  for (int f = 0; f < mesh.face_count(); ++f)
    for (int v : mesh.faces[f]) vertex_faces[v].push_back(f);
  // Faces within two vertex-rings of each face.
  auto ring_of = [&](int face) {
    std::vector<int> ring{face};
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<int> grown = ring;
      for (int f : ring)
        for (int v : mesh.faces[f])
          grown.insert(grown.end(), vertex_faces[v].begin(), vertex_faces[v].end());
      std::sort(grown.begin(), grown.end());
      grown.erase(std::unique(grown.begin(), grown.end()), grown.end());
      ring = std::move(grown);
    }
    return ring;
  };
  CycleStats stats;
  std::vector<int> ring;
  for (int y = 0; y < c12.height(); ++y)
    for (int x = 0; x < c12.width(); ++x) {
      if (!c12.visible.at(x, y)) continue;
      ++stats.visible;
      ring = ring_of(v1.face.at(x, y));
      auto same_sheet = [&](int qx, int qy) {
        return c21.visible.inside(qx, qy) && c21.visible.at(qx, qy) &&
               std::binary_search(ring.begin(), ring.end(), v2.face.at(qx, qy));
      };
      const double tx = c12.target.at(x, y, 0), ty = c12.target.at(x, y, 1);
      bool ok = false;
      const Vec2 back = sample_correspondence(c21, tx, ty, &ok, same_sheet);
      if (!ok) continue;
      // Largest view-1 distance between adjacent accepted view-2 pixels.
      const int x0 = static_cast<int>(std::floor(tx));
      const int y0 = static_cast<int>(std::floor(ty));
      double footprint = 0.0;
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          const int ax = x0 + dx, ay = y0 + dy;
          if (!same_sheet(ax, ay)) continue;
          for (const auto& [bx, by] : {std::pair{ax + 1, ay}, std::pair{ax, ay + 1}}) {
            if (bx > x0 + 1 || by > y0 + 1 || !same_sheet(bx, by)) continue;
            footprint = std::max(
                footprint,
                std::hypot(double(c21.target.at(ax, ay, 0)) - c21.target.at(bx, by, 0),
                           double(c21.target.at(ax, ay, 1)) - c21.target.at(bx, by, 1)));
          }
        }
      // Same quantity from the view-1 side: a view-2 pixel spans about
      // 1 / sigma_min(d corr12 / dp) view-1 pixels.
      auto diff = [&](int ax, int ay, int bx, int by, Vec2* out) {
        if (!c12.visible.inside(bx, by) || !c12.visible.at(bx, by)) return false;
        if (!std::binary_search(ring.begin(), ring.end(), v1.face.at(bx, by)))
          return false;
        *out = Vec2(c12.target.at(bx, by, 0) - c12.target.at(ax, ay, 0),
                    c12.target.at(bx, by, 1) - c12.target.at(ax, ay, 1));
        return true;
      };
      Vec2 jx, jy;
      const bool hx = diff(x, y, x + 1, y, &jx) ||
                      (diff(x, y, x - 1, y, &jx) && (jx = -jx, true));
      const bool hy = diff(x, y, x, y + 1, &jy) ||
                      (diff(x, y, x, y - 1, &jy) && (jy = -jy, true));
      if (hx && hy) {
        Eigen::Matrix2d jac;
        jac.col(0) = jx;
        jac.col(1) = jy;
        const double smin = Eigen::JacobiSVD<Eigen::Matrix2d>(jac).singularValues()(1);
        if (smin > 1e-9) footprint = std::max(footprint, 1.0 / smin);
      }
      const double err = (back - Vec2(x, y)).norm();
      if (err <= tol_px) ++stats.within_tol;
      if (err <= tol_px * std::max(1.0, footprint)) ++stats.within_footprint;
    }
  return stats;
}

}  // namespace geofeat
