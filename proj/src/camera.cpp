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
#include <algorithm>
#include <cmath>
#include <limits>

#include "geofeat/error.hpp"
#include "geofeat/synth.hpp"

namespace geofeat {
namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

// Unit vector from the subject toward the camera.
Vec3 direction_from_angles(double azimuth, double elevation) {
  return Vec3(std::cos(elevation) * std::sin(azimuth), std::sin(elevation),
              std::cos(elevation) * std::cos(azimuth));
}

double elevation_of(const Vec3& d) {
  return std::asin(std::clamp(d.y(), -1.0, 1.0));
}

}  // namespace

Camera look_at(const Vec3& eye, const Vec3& target, double focal, int width,
               int height) {
  if (!(focal > 0.0)) throw_usage("camera focal length must be positive");
  if (width <= 0 || height <= 0) throw_usage("camera image size must be positive");
  const Vec3 z = (target - eye).normalized();
  Vec3 up = Vec3::UnitY();
  if (std::fabs(z.dot(up)) > 0.999) up = Vec3::UnitZ();
  const Vec3 x = z.cross(up).normalized();
  const Vec3 y = z.cross(x);
  Camera cam;
  cam.focal = focal;
  cam.width = width;
  cam.height = height;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.rotation.row(0) = x.transpose();
  cam.rotation.row(1) = y.transpose();
  cam.rotation.row(2) = z.transpose();
  cam.translation = -(cam.rotation * eye);
  return cam;
}

Projection project(const Camera& camera, const Vec3& world) {
  const Vec3 p = camera.to_camera(world);
  Projection out;
  out.depth = p.z();
  if (p.z() <= 0.0) {
    out.x = out.y = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.x = camera.focal * p.x() / p.z() + camera.cx;
  out.y = camera.focal * p.y() / p.z() + camera.cy;
  return out;
}

double facing_angle_deg(const Camera& a, const Camera& b) {
  const double c = std::clamp(a.forward().dot(b.forward()), -1.0, 1.0);
  return std::acos(c) / kDegToRad;
}

std::vector<Camera> sample_cameras(Rng& rng, const Vec3& center,
                                   const CameraRig& rig, int count) {
  if (!(rig.min_distance > 0.0) || rig.max_distance < rig.min_distance)
    throw_usage("camera distance range is empty");
  if (rig.max_angle_deg < 0.0 || rig.max_elevation_deg < 0.0)
    throw_usage("camera angle limits must be nonnegative");
  const double max_angle = rig.max_angle_deg * kDegToRad;
  const double max_elev = rig.max_elevation_deg * kDegToRad;
  const double cos_max = std::cos(max_angle);
  for (int attempt = 0; attempt < rig.max_retries; ++attempt) {
    std::vector<Vec3> dirs;
    dirs.push_back(direction_from_angles(rng.uniform(0.0, 2.0 * 3.14159265358979323846),
                                         rng.uniform(-max_elev, max_elev)));
    bool ok = true;
    for (int i = 1; i < count && ok; ++i) {
      // Uniform on the spherical cap of half-angle max_angle around dirs[0].
      const double cos_t = rng.uniform(cos_max, 1.0);
      const double spin = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
      const Vec3 axis = Eigen::AngleAxisd(spin, dirs[0]) * dirs[0].unitOrthogonal();
      const double theta = std::acos(std::clamp(cos_t, -1.0, 1.0));
      const Vec3 d = (Eigen::AngleAxisd(theta, axis) * dirs[0]).normalized();
      if (std::fabs(elevation_of(d)) > max_elev + 1e-12) ok = false;
      for (const Vec3& e : dirs)
        if (d.dot(e) < cos_max - 1e-12) ok = false;
      dirs.push_back(d);
    }
    if (!ok) continue;
    std::vector<Camera> cams;
    for (const Vec3& d : dirs) {
      const double dist = rng.uniform(rig.min_distance, rig.max_distance);
      cams.push_back(look_at(center + d * dist, center, rig.focal, rig.width,
                             rig.height));
    }
    return cams;
  }
  throw_numeric("camera sampling exceeded " + std::to_string(rig.max_retries) +
                " retries");
}

std::pair<Camera, Camera> sample_camera_pair(Rng& rng, const Vec3& center,
                                             const CameraRig& rig) {
  auto cams = sample_cameras(rng, center, rig, 2);
  return {cams[0], cams[1]};
}

}  // namespace geofeat
