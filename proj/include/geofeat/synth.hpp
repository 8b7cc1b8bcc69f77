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

#ifndef GEOFEAT_SYNTH_HPP_
#define GEOFEAT_SYNTH_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "geofeat/geodesic.hpp"
#include "geofeat/image_io.hpp"
#include "geofeat/mesh.hpp"
#include "geofeat/rng.hpp"

namespace geofeat {

// ---------------------------------------------------------------------------
// Articulated toy humanoid.

struct Bone {
  int parent = -1;  // -1 for the root
  Vec3 pivot;       // rest-pose joint position; rest rotation is identity
};

struct SkinWeight {
  int bone;
  double weight;
};

// Contiguous run of faces belonging to one body part.
struct BodyPart {
  int first_face = 0;
  int face_count = 0;
  int mirror = -1;  // index of the mirrored part, -1 if none
};

struct ArticulatedModel {
  TriangleMesh rest;  // with per-corner uv
  std::vector<Bone> bones;
  std::vector<std::vector<SkinWeight>> weights;  // per vertex
  FloatImage texture;                            // RGB in [0,1]
  std::vector<BodyPart> parts;                   // 0 = torso, then limbs
  Vec3 center;                                   // bounding-box center
};

// Capsule-like torso with `limb_count` tube limbs of `segments` bones each.
// Limbs come in mirrored pairs (arms, legs, then extra pairs); an odd count
// adds a head on top. Deterministic in `seed`.
ArticulatedModel build_toy_humanoid(std::uint64_t seed, int limb_count,
                                    int segments);

// Per-bone XYZ Euler angles in radians.
using JointAngles = std::vector<Vec3>;

// Linear blend skinning. Zero angles reproduce the rest mesh exactly.
TriangleMesh pose_model(const ArticulatedModel& model,
                        const JointAngles& angles);

// Uniform angles in [-limit, limit] per axis for every non-root bone; the
// root stays unrotated (viewpoint variety comes from the cameras).
JointAngles sample_pose(const ArticulatedModel& model, Rng& rng,
                        double limit_rad);

// ---------------------------------------------------------------------------
// Pinhole cameras.

struct Camera {
  double focal = 500.0;  // pixels, fx = fy
  double cx = 128.0;
  double cy = 192.0;
  int width = 256;
  int height = 384;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
  Vec3 translation = Vec3::Zero();

  Vec3 to_camera(const Vec3& world) const {
    return rotation * world + translation;
  }
  Vec3 center() const { return -rotation.transpose() * translation; }
  Vec3 forward() const { return rotation.row(2).transpose(); }
};

// Camera at `eye` looking at `target`; image x right, y down.
Camera look_at(const Vec3& eye, const Vec3& target, double focal, int width,
               int height);

struct Projection {
  double x = 0.0;  // pixel coordinates; pixel (i, j) has its center at (i, j)
  double y = 0.0;
  double depth = 0.0;  // camera-frame z
  bool in_front() const { return depth > 0.0; }
};

// pixel = focal * (x/z, y/z) + principal point. Points with depth <= 0 come
// back flagged (in_front() false) with NaN pixel coordinates.
Projection project(const Camera& camera, const Vec3& world);

struct CameraRig {
  double min_distance = 1.5;  // meters from the subject center
  double max_distance = 3.6;
  double max_angle_deg = 60.0;  // between facing directions
  double max_elevation_deg = 25.0;
  double focal = 500.0;
  int width = 256;
  int height = 384;
  int max_retries = 10000;
};

// Cameras looking at `center` with every pairwise facing-direction angle
// within the rig limit.
std::vector<Camera> sample_cameras(Rng& rng, const Vec3& center,
                                   const CameraRig& rig, int count);
std::pair<Camera, Camera> sample_camera_pair(Rng& rng, const Vec3& center,
                                             const CameraRig& rig);
double facing_angle_deg(const Camera& a, const Camera& b);

// ---------------------------------------------------------------------------
// Rendering and ground truth.

struct RenderedView {
  FloatImage rgb;           // 3 channels
  Raster<int> face;         // -1 on background
  FloatImage bary;          // 3 channels, 0 on background
  FloatImage depth;         // +inf on background
  Camera camera;
  std::shared_ptr<const TriangleMesh> mesh;  // posed mesh that was drawn

  int width() const { return face.width; }
  int height() const { return face.height; }
  bool foreground(int x, int y) const { return face.at(x, y) >= 0; }
  SurfacePoint surface_point(int x, int y) const;
};

// Z-buffered rasterization with perspective-correct barycentrics and
// bilinear texture lookup (uv (0,0) = top-left texel).
RenderedView rasterize(std::shared_ptr<const TriangleMesh> mesh,
                       const FloatImage& texture, const Camera& camera);

struct CorrespondenceField {
  FloatImage target;      // 2 channels, pixel coordinates in the other view
  Raster<std::uint8_t> valid;    // foreground with an in-image target
  Raster<std::uint8_t> visible;  // valid and not occluded in the other view

  int width() const { return valid.width; }
  int height() const { return valid.height; }
};

inline constexpr double kVisibilityDepthTolerance = 1e-3;  // relative

CorrespondenceField correspondence_field(const RenderedView& src,
                                         const RenderedView& dst);

// .flo offsets (target - pixel), unknown where invalid.
FloatImage correspondence_to_flow(const CorrespondenceField& corr);
// Valid pixels are those with known flow; `visible` must be supplied.
CorrespondenceField flow_to_correspondence(const FloatImage& flow,
                                           const Raster<std::uint8_t>& visible);

// Geodesic distances (meters) from a surface point to every foreground
// pixel of `view`; background holds NaN.
using FieldProvider = std::function<GeodesicField(const SurfacePoint&)>;
FloatImage geodesic_map(const RenderedView& view, int source_x, int source_y,
                        const FieldProvider& provider);
FloatImage geodesic_map(const RenderedView& view, const GeodesicField& field);

// Field value at a sub-pixel position from the visible pixels around it:
// bilinear with all four, affine with three, linear with two. `ok` is false
// when none is usable. `accept`, when set, further filters pixels.
Vec2 sample_correspondence(const CorrespondenceField& corr, double x, double y,
                           bool* ok,
                           const std::function<bool(int, int)>& accept = {});

// Cycle check on a rendered pair: for visible p, sample corr21 at corr12(p)
// using only view-2 pixels on the same surface sheet (faces sharing a vertex
// with the face seen at p) and compare with p.
struct CycleStats {
  long visible = 0;
  long within_tol = 0;        // error <= tol_px
  // error <= tol_px * max(1, size of a view-2 pixel in view-1 pixels), the
  // size taken from differences of corr21 around the target and of corr12
  // around p, whichever is larger
  long within_footprint = 0;
  double tol_fraction() const {
    return visible ? double(within_tol) / visible : 1.0;
  }
  double footprint_fraction() const {
    return visible ? double(within_footprint) / visible : 1.0;
  }
};
CycleStats cycle_check(const RenderedView& v1, const RenderedView& v2,
                       const CorrespondenceField& c12,
                       const CorrespondenceField& c21, double tol_px);

}  // namespace geofeat

#endif  // GEOFEAT_SYNTH_HPP_
