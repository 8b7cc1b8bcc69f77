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
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <queue>

#include "geofeat/error.hpp"
#include "geofeat/synth.hpp"

namespace geofeat {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kLatRows = 14;  // torso vertex rows 0..14 (0, 14 = poles)
constexpr int kLonCols = 24;
constexpr int kRingsPerSegment = 4;
constexpr int kTextureSize = 256;
// Parts are laid out for a ~1.1 m figure, then scaled to human height.
constexpr double kBodyScale = 1.5;

struct LimbSpec {
  int row0;            // first torso vertex row of the 3x3 patch
  double center_deg;   // azimuth of the patch center
  Vec3 direction;
  double length;
  double radius;
};

// Pair k of limbs; the mirror uses azimuth 180 - center and direction with
// negated x.
LimbSpec pair_spec(int pair) {
  switch (pair) {
    case 0: return {3, 0.0, Vec3(0.8, -1.0, 0.05), 0.42, 0.038};
    case 1: return {9, 0.0, Vec3(0.25, -1.0, 0.0), 0.48, 0.05};
    default: return {5, 60.0, Vec3(0.5, -0.2, 0.9), 0.30, 0.032};
  }
}

LimbSpec mirrored(LimbSpec s) {
  s.center_deg = 180.0 - s.center_deg;
  s.direction.x() = -s.direction.x();
  return s;
}

double head_radius(double s) {
  constexpr double kNeck = 0.035, kCenter = 0.13, kBulb = 0.085;
  if (s <= kCenter - kBulb * 0.9) return kNeck;
  const double r2 = kBulb * kBulb - (s - kCenter) * (s - kCenter);
  return std::max(kNeck, std::sqrt(std::max(0.0, r2)));
}

struct Builder {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<std::array<Vec2, 3>> uv;  // local chart coordinates for now
  std::vector<int> face_part;
  std::vector<std::vector<SkinWeight>> weights;

  int add_vertex(const Vec3& p, std::vector<SkinWeight> w) {
    vertices.push_back(p);
    weights.push_back(std::move(w));
    return static_cast<int>(vertices.size()) - 1;
  }
  void add_face(int a, int b, int c, Vec2 ua, Vec2 ub, Vec2 uc, int part) {
    faces.push_back({a, b, c});
    uv.push_back({ua, ub, uc});
    face_part.push_back(part);
  }
};

int wrap_col(int j) { return ((j % kLonCols) + kLonCols) % kLonCols; }

// Make face windings agree across shared edges, then point normals outward.
void orient_faces(std::vector<Face>& faces,
                  std::vector<std::array<Vec2, 3>>& uv,
                  const std::vector<Vec3>& vertices) {
  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (int f = 0; f < static_cast<int>(faces.size()); ++f)
    for (int i = 0; i < 3; ++i) {
      int a = faces[f][i], b = faces[f][(i + 1) % 3];
      edge_faces[{std::min(a, b), std::max(a, b)}].push_back(f);
    }
  auto has_directed = [&](int f, int a, int b) {
    for (int i = 0; i < 3; ++i)
      if (faces[f][i] == a && faces[f][(i + 1) % 3] == b) return true;
    return false;
  };
  auto flip = [&](int f) {
    std::swap(faces[f][1], faces[f][2]);
    std::swap(uv[f][1], uv[f][2]);
  };
  std::vector<char> seen(faces.size(), 0);
  for (size_t start = 0; start < faces.size(); ++start) {
    if (seen[start]) continue;
    seen[start] = 1;
    std::queue<int> queue;
    queue.push(static_cast<int>(start));
    while (!queue.empty()) {
      const int f = queue.front();
      queue.pop();
      for (int i = 0; i < 3; ++i) {
        const int a = faces[f][i], b = faces[f][(i + 1) % 3];
        for (int g : edge_faces[{std::min(a, b), std::max(a, b)}]) {
          if (g == f || seen[g]) continue;
          if (has_directed(g, a, b)) flip(g);
          seen[g] = 1;
          queue.push(g);
        }
      }
    }
  }
  double volume = 0.0;
  for (const Face& f : faces)
    volume += vertices[f[0]].dot(vertices[f[1]].cross(vertices[f[2]]));
  if (volume < 0.0)
    for (size_t f = 0; f < faces.size(); ++f) flip(static_cast<int>(f));
}

// Tube from a closed loop of existing vertices along `dir`, ending in a fan
// cap. Returns nothing; faces are tagged with `part`.
void extrude_limb(Builder& b, const std::vector<int>& loop, const Vec3& dir_in,
                  double length, const std::function<double(double)>& radius,
                  int segments, int first_bone, int part) {
  const Vec3 dir = dir_in.normalized();
  Vec3 origin = Vec3::Zero();
  for (int v : loop) origin += b.vertices[v];
  origin /= static_cast<double>(loop.size());
  Vec3 u = dir.unitOrthogonal();
  Vec3 w = dir.cross(u);
  const int n = static_cast<int>(loop.size());
  std::vector<double> alpha(n);
  for (int k = 0; k < n; ++k) {
    const Vec3 d = b.vertices[loop[k]] - origin;
    alpha[k] = std::atan2(d.dot(w), d.dot(u));
  }
  const double seg_len = length / segments;
  const double half = 0.25 * seg_len;
  auto skin = [&](double s) -> std::vector<SkinWeight> {
    if (s < 2.0 * half) {
      const double t = s / (2.0 * half);
      return {{0, 1.0 - t}, {first_bone, t}};
    }
    for (int j = 1; j < segments; ++j) {
      const double joint = j * seg_len;
      if (s >= joint - half && s <= joint + half) {
        const double t = (s - (joint - half)) / (2.0 * half);
        return {{first_bone + j - 1, 1.0 - t}, {first_bone + j, t}};
      }
    }
    const int j = std::min(static_cast<int>(s / seg_len), segments - 1);
    return {{first_bone + j, 1.0}};
  };

  const int rings = segments * kRingsPerSegment;
  const double cap = radius(length) * 0.7;
  const double v_total = length + cap;
  std::vector<int> prev = loop;
  double prev_s = 0.0;
  for (int r = 1; r <= rings + 1; ++r) {
    const double s = r <= rings ? length * r / rings : 0.0;
    std::vector<int> ring;
    if (r <= rings) {
      const Vec3 c = origin + dir * s;
      const double rad = radius(s);
      for (int k = 0; k < n; ++k)
        ring.push_back(b.add_vertex(
            c + rad * (std::cos(alpha[k]) * u + std::sin(alpha[k]) * w),
            skin(s)));
      for (int k = 0; k < n; ++k) {
        const int k1 = (k + 1) % n;
        const Vec2 a0(double(k) / n, prev_s / v_total);
        const Vec2 a1(double(k + 1) / n, prev_s / v_total);
        const Vec2 b0(double(k) / n, s / v_total);
        const Vec2 b1(double(k + 1) / n, s / v_total);
        b.add_face(prev[k], prev[k1], ring[k1], a0, a1, b1, part);
        b.add_face(prev[k], ring[k1], ring[k], a0, b1, b0, part);
      }
      prev = std::move(ring);
      prev_s = s;
    } else {
      const int tip = b.add_vertex(origin + dir * (length + cap),
                                   {{first_bone + segments - 1, 1.0}});
      for (int k = 0; k < n; ++k) {
        const int k1 = (k + 1) % n;
        b.add_face(prev[k], prev[k1], tip, Vec2(double(k) / n, prev_s / v_total),
                   Vec2(double(k + 1) / n, prev_s / v_total),
                   Vec2((k + 0.5) / n, 1.0), part);
      }
    }
  }
}

Vec3 hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  Vec3 rgb;
  if (hp < 1) rgb = {c, x, 0};
  else if (hp < 2) rgb = {x, c, 0};
  else if (hp < 3) rgb = {0, c, x};
  else if (hp < 4) rgb = {0, x, c};
  else if (hp < 5) rgb = {x, 0, c};
  else rgb = {c, 0, x};
  return rgb + Vec3::Constant(v - c);
}

// Smooth periodic value noise on an 8x8 lattice, zero mean over the tile.
struct TileNoise {
  static constexpr int kGrid = 8;
  std::array<double, kGrid * kGrid> lattice{};
  explicit TileNoise(Rng rng) {
    double mean = 0.0;
    for (double& v : lattice) mean += (v = rng.uniform(-1.0, 1.0));
    mean /= lattice.size();
    for (double& v : lattice) v -= mean;
  }
  double at(double u, double v) const {
    const double x = u * kGrid, y = v * kGrid;
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double tx = x - x0, ty = y - y0;
    auto g = [&](int i, int j) {
      return lattice[((j % kGrid + kGrid) % kGrid) * kGrid + (i % kGrid + kGrid) % kGrid];
    };
    const double sx = tx * tx * (3 - 2 * tx), sy = ty * ty * (3 - 2 * ty);
    return (1 - sy) * ((1 - sx) * g(x0, y0) + sx * g(x0 + 1, y0)) +
           sy * ((1 - sx) * g(x0, y0 + 1) + sx * g(x0 + 1, y0 + 1));
  }
};

// Base color of a part at local chart coordinates; mirrored limbs share it.
Vec3 part_color(int kind, double u, double v) {
  if (kind == 0) {  // torso: hue sweeps around, bands top to bottom
    const double hue = 0.05 + 0.08 * std::sin(2 * kPi * u);
    const double val = 0.6 + 0.2 * std::sin(2 * kPi * 4 * v);
    const double sat = 0.35 + 0.3 * std::cos(2 * kPi * u);
    return hsv_to_rgb(hue, sat, val);
  }
  if (kind == 1) {  // head
    const bool spot = std::fabs(u - 0.25) < 0.1 && v > 0.5 && v < 0.8;
    return hsv_to_rgb(0.12, spot ? 0.1 : 0.5, spot ? 0.95 : 0.7);
  }
  const double hue = 0.3 + 0.2 * (kind - 2);
  double val = 0.5 + 0.2 * std::sin(2 * kPi * 3 * v);
  if (std::fabs(u - 0.5) < 0.06) val += 0.25;
  return hsv_to_rgb(hue, 0.65, val);
}

}  // namespace

ArticulatedModel build_toy_humanoid(std::uint64_t seed, int limb_count,
                                    int segments) {
  if (limb_count < 2 || limb_count > 7)
    throw_usage("limb_count must be in [2, 7], got " +
                std::to_string(limb_count));
  if (segments < 1 || segments > 8)
    throw_usage("segments must be in [1, 8], got " + std::to_string(segments));
  Rng rng(seed, "toy_humanoid");
  const double rx = 0.16 * (1.0 + 0.05 * rng.uniform(-1, 1));
  const double ry = 0.24 * (1.0 + 0.05 * rng.uniform(-1, 1));
  const double rz = 0.11 * (1.0 + 0.05 * rng.uniform(-1, 1));
  const int pairs = limb_count / 2;
  const bool head = limb_count % 2 == 1;

  ArticulatedModel model;
  Builder b;
  model.bones.push_back({-1, Vec3::Zero()});
  const std::vector<SkinWeight> root_only{{0, 1.0}};

  // Torso grid. Row i, column j at polar angle pi*i/14, azimuth 15*(j+0.5).
  std::vector<std::vector<int>> grid(kLatRows + 1);
  grid[0] = {b.add_vertex(Vec3(0, ry, 0), root_only)};
  for (int i = 1; i < kLatRows; ++i) {
    const double theta = kPi * i / kLatRows;
    for (int j = 0; j < kLonCols; ++j) {
      const double phi = 2 * kPi * (j + 0.5) / kLonCols;
      grid[i].push_back(b.add_vertex(
          Vec3(rx * std::sin(theta) * std::cos(phi), ry * std::cos(theta),
               rz * std::sin(theta) * std::sin(phi)),
          root_only));
    }
  }
  grid[kLatRows] = {b.add_vertex(Vec3(0, -ry, 0), root_only)};

  std::vector<LimbSpec> limbs;
  for (int p = 0; p < pairs; ++p) {
    limbs.push_back(pair_spec(p));
    limbs.push_back(mirrored(pair_spec(p)));
  }
  // Quads removed under limb attachments: (row, col) of the quad's top-left.
  std::vector<std::vector<char>> removed(kLatRows, std::vector<char>(kLonCols, 0));
  std::vector<std::vector<int>> loops;
  for (const LimbSpec& s : limbs) {
    const int j0 = wrap_col(static_cast<int>(std::lround(s.center_deg / 15.0)) - 2);
    for (int i = s.row0; i < s.row0 + 3; ++i)
      for (int j = 0; j < 3; ++j) removed[i][wrap_col(j0 + j)] = 1;
    std::vector<int> loop;
    for (int j = 0; j < 3; ++j) loop.push_back(grid[s.row0][wrap_col(j0 + j)]);
    for (int i = 0; i < 3; ++i) loop.push_back(grid[s.row0 + i][wrap_col(j0 + 3)]);
    for (int j = 3; j > 0; --j) loop.push_back(grid[s.row0 + 3][wrap_col(j0 + j)]);
    for (int i = 3; i > 0; --i) loop.push_back(grid[s.row0 + i][wrap_col(j0)]);
    loops.push_back(std::move(loop));
  }

  const double uscale = 1.0 / (kLonCols + 1);
  auto torso_uv = [&](int i, int j_unwrapped) {
    return Vec2((j_unwrapped + 0.5) * uscale, double(i) / kLatRows);
  };
  for (int j = 0; j < kLonCols; ++j) {
    const int j1 = wrap_col(j + 1);
    if (!head)
      b.add_face(grid[0][0], grid[1][j], grid[1][j1], Vec2((j + 1) * uscale, 0.0),
                 torso_uv(1, j), torso_uv(1, j + 1), 0);
    b.add_face(grid[kLatRows][0], grid[kLatRows - 1][j1], grid[kLatRows - 1][j],
               Vec2((j + 1) * uscale, 1.0), torso_uv(kLatRows - 1, j + 1),
               torso_uv(kLatRows - 1, j), 0);
  }
  for (int i = 1; i < kLatRows - 1; ++i)
    for (int j = 0; j < kLonCols; ++j) {
      if (removed[i][j]) continue;
      const int j1 = wrap_col(j + 1);
      b.add_face(grid[i][j], grid[i + 1][j], grid[i + 1][j1], torso_uv(i, j),
                 torso_uv(i + 1, j), torso_uv(i + 1, j + 1), 0);
      b.add_face(grid[i][j], grid[i + 1][j1], grid[i][j1], torso_uv(i, j),
                 torso_uv(i + 1, j + 1), torso_uv(i, j + 1), 0);
    }

  // Part 0 is the torso; limbs follow in order, the head last.
  std::vector<int> part_kind{0};
  std::vector<int> part_mirror{-1};
  for (size_t l = 0; l < limbs.size(); ++l) {
    const int first_bone = static_cast<int>(model.bones.size());
    const Vec3 dir = limbs[l].direction.normalized();
    Vec3 origin = Vec3::Zero();
    for (int v : loops[l]) origin += b.vertices[v];
    origin /= static_cast<double>(loops[l].size());
    for (int j = 0; j < segments; ++j)
      model.bones.push_back({j == 0 ? 0 : first_bone + j - 1,
                             origin + dir * (limbs[l].length * j / segments)});
    const double r0 = limbs[l].radius;
    const double len = limbs[l].length;
    const int part = static_cast<int>(part_kind.size());
    extrude_limb(b, loops[l], dir, len,
                 [r0, len](double s) { return r0 * (1.0 - 0.3 * s / len); },
                 segments, first_bone, part);
    part_kind.push_back(2 + static_cast<int>(l / 2));
    part_mirror.push_back(l % 2 == 0 ? part + 1 : part - 1);
  }
  if (head) {
    const int first_bone = static_cast<int>(model.bones.size());
    Vec3 origin = Vec3::Zero();
    for (int v : grid[1]) origin += b.vertices[v];
    origin /= kLonCols;
    const double len = 0.2;
    for (int j = 0; j < segments; ++j)
      model.bones.push_back({j == 0 ? 0 : first_bone + j - 1,
                             origin + Vec3(0, len * j / segments, 0)});
    extrude_limb(b, grid[1], Vec3(0, 1, 0), len, head_radius, segments,
                 first_bone, static_cast<int>(part_kind.size()));
    part_kind.push_back(1);
    part_mirror.push_back(-1);
  }
  orient_faces(b.faces, b.uv, b.vertices);

  // Group faces by part (stable) and drop unreferenced vertices.
  const int n_parts = static_cast<int>(part_kind.size());
  std::vector<int> order(b.faces.size());
  for (size_t f = 0; f < order.size(); ++f) order[f] = static_cast<int>(f);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int c) { return b.face_part[a] < b.face_part[c]; });
  std::vector<int> remap(b.vertices.size(), -1);
  TriangleMesh& mesh = model.rest;
  for (int f : order)
    for (int v : b.faces[f])
      if (remap[v] < 0) {
        remap[v] = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(b.vertices[v]);
        model.weights.push_back(b.weights[v]);
      }
  const int grid_cols = static_cast<int>(std::ceil(std::sqrt(double(n_parts))));
  const double margin = 0.04;
  auto atlas = [&](int part, const Vec2& local) {
    const int col = part % grid_cols, row = part / grid_cols;
    return Vec2((col + margin + local.x() * (1 - 2 * margin)) / grid_cols,
                (row + margin + local.y() * (1 - 2 * margin)) / grid_cols);
  };
  model.parts.assign(n_parts, BodyPart{});
  for (size_t k = 0; k < order.size(); ++k) {
    const int f = order[k];
    const int part = b.face_part[f];
    Face face;
    std::array<Vec2, 3> uv;
    for (int i = 0; i < 3; ++i) {
      face[i] = remap[b.faces[f][i]];
      uv[i] = atlas(part, b.uv[f][i]);
    }
    if (model.parts[part].face_count == 0)
      model.parts[part].first_face = static_cast<int>(k);
    ++model.parts[part].face_count;
    mesh.faces.push_back(face);
    mesh.uv.push_back(uv);
  }
  for (int p = 0; p < n_parts; ++p) model.parts[p].mirror = part_mirror[p];

  // Texture atlas: each tile evaluates its part color over the whole tile so
  // bilinear lookups near chart borders stay within the part.
  model.texture = FloatImage(kTextureSize, kTextureSize, 3, 0.0f);
  std::vector<TileNoise> noise;
  for (int p = 0; p < n_parts; ++p)
    noise.emplace_back(rng.split("texture_noise_" + std::to_string(p)));
  const double tile = double(kTextureSize) / grid_cols;
  for (int y = 0; y < kTextureSize; ++y)
    for (int x = 0; x < kTextureSize; ++x) {
      const int col = std::min(static_cast<int>((x + 0.5) / tile), grid_cols - 1);
      const int row = std::min(static_cast<int>((y + 0.5) / tile), grid_cols - 1);
      const int part = row * grid_cols + col;
      Vec3 rgb(0.5, 0.5, 0.5);
      if (part < n_parts) {
        auto local = [&](double t, int cell) {
          const double l = ((t + 0.5) / tile - cell - margin) / (1 - 2 * margin);
          return std::clamp(l, 0.0, 1.0);
        };
        const double u = local(x, col), v = local(y, row);
        rgb = part_color(part_kind[part], u, v) *
              (1.0 + 0.12 * noise[part].at(u, v));
      }
      for (int c = 0; c < 3; ++c)
        model.texture.at(x, y, c) =
            static_cast<float>(std::clamp(rgb[c], 0.0, 1.0));
    }

  for (Vec3& v : mesh.vertices) v *= kBodyScale;
  for (Bone& bone : model.bones) bone.pivot *= kBodyScale;
  Vec3 lo = mesh.vertices[0], hi = mesh.vertices[0];
  for (const Vec3& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  model.center = 0.5 * (lo + hi);
  return model;
}

TriangleMesh pose_model(const ArticulatedModel& model,
                        const JointAngles& angles) {
  if (angles.size() != model.bones.size())
    throw_usage("pose has " + std::to_string(angles.size()) +
                " joint rotations, model has " +
                std::to_string(model.bones.size()) + " bones");
  using Affine = Eigen::Transform<double, 3, Eigen::Affine>;
  std::vector<Affine> global(model.bones.size());
  for (size_t b = 0; b < model.bones.size(); ++b) {
    const Bone& bone = model.bones[b];
    const Vec3& a = angles[b];
    const Eigen::Matrix3d r =
        (Eigen::AngleAxisd(a.z(), Vec3::UnitZ()) *
         Eigen::AngleAxisd(a.y(), Vec3::UnitY()) *
         Eigen::AngleAxisd(a.x(), Vec3::UnitX()))
            .toRotationMatrix();
    Affine local = Affine::Identity();
    local.translate(bone.pivot).rotate(r).translate(-bone.pivot);
    global[b] = bone.parent < 0 ? local : global[bone.parent] * local;
  }
  TriangleMesh out = model.rest;
  for (size_t v = 0; v < out.vertices.size(); ++v) {
    Vec3 p = Vec3::Zero();
    for (const SkinWeight& w : model.weights[v])
      p += w.weight * (global[w.bone] * model.rest.vertices[v]);
    out.vertices[v] = p;
  }
  return out;
}

JointAngles sample_pose(const ArticulatedModel& model, Rng& rng,
                        double limit_rad) {
  JointAngles angles(model.bones.size(), Vec3::Zero());
  for (size_t b = 1; b < angles.size(); ++b)
    for (int k = 0; k < 3; ++k) angles[b][k] = rng.uniform(-limit_rad, limit_rad);
  return angles;
}

}  // namespace geofeat
