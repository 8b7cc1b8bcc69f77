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

#ifndef GEOFEAT_GPS_LOSS_HPP_
#define GEOFEAT_GPS_LOSS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "geofeat/tensor.hpp"

namespace geofeat {

// Continuous position in a feature map's own pixel grid; n is the batch
// index.
struct MapPoint {
  int n;
  double x, y;
};

// Geodesic distance in meters mapped onto the feature-distance range:
// min(2, 2 g / g_scale).
inline double normalize_geodesic(double g, double g_scale) {
  return std::min(2.0, 2.0 * g / g_scale);
}

// Bilinear feature lookup followed by re-normalization: [M, C].
template <typename S>
Var sample_features(Graph<S>& g, Var fmap, const std::vector<MapPoint>& points) {
  const auto& shp = g.shape(fmap);
  GatherSpec<S> spec;
  spec.taps.reserve(points.size() * 4);
  for (const MapPoint& p : points) spec.add_bilinear(p.n, p.x, p.y, shp[1], shp[2]);
  return l2_normalize_channels(g, gather_pixels(g, fmap, std::move(spec)), static_cast<S>(1e-8));
}

// Row-wise 1 - a.b for [M, C] inputs: [M].
template <typename S>
Var cosine_distance(Graph<S>& g, Var a, Var b) {
  return affine(g, row_dot(g, a, b), S(-1), S(1));
}

// Mean cosine distance between F1 at p1[i] and F2 at p2[i].
template <typename S>
Var loss_consistency(Graph<S>& g, Var f1, Var f2, const std::vector<MapPoint>& p1,
                     const std::vector<MapPoint>& p2) {
  if (p1.empty()) throw_data("consistency loss: no visible correspondences");
  if (p1.size() != p2.size()) throw_usage("consistency loss: point lists differ in length");
  return mean(g, cosine_distance(g, sample_features(g, f1, p1), sample_features(g, f2, p2)));
}

struct OrdinalTriplet {
  MapPoint r, t1, t2;
  double g1, g2;  // geodesic distances r-t1 and r-t2 (any common unit)
};

// Mean of log(1 + exp(s (d(r,t1) - d(r,t2)))), s = sign(g2 - g1). Triplets
// with g1 == g2 are skipped and counted in *skipped.
template <typename S>
Var loss_sparse_ordinal(Graph<S>& g, Var fmap, const std::vector<OrdinalTriplet>& triplets,
                        int* skipped = nullptr) {
  std::vector<MapPoint> r, t1, t2;
  std::vector<S> sign;
  int ties = 0;
  for (const auto& t : triplets) {
    if (t.g1 == t.g2) {
      ++ties;
      continue;
    }
    r.push_back(t.r);
    t1.push_back(t.t1);
    t2.push_back(t.t2);
    sign.push_back(t.g2 > t.g1 ? S(1) : S(-1));
  }
  if (skipped) *skipped = ties;
  if (r.empty()) throw_data("ordinal loss: no usable triplets");
  const Var fr = sample_features(g, fmap, r);
  const Var d1 = cosine_distance(g, fr, sample_features(g, fmap, t1));
  const Var d2 = cosine_distance(g, fr, sample_features(g, fmap, t2));
  Tensor<S> s({static_cast<int>(sign.size())});
  s.data.assign(sign.begin(), sign.end());
  return mean(g, softplus(g, mul(g, sub(g, d1, d2), g.constant(std::move(s)))));
}

// Mean over targets of log(1 + exp(ghat - d(F1(p1), F2(target)))).
template <typename S>
Var loss_cross_view(Graph<S>& g, Var f1, Var f2, const MapPoint& p1,
                    const std::vector<MapPoint>& targets, const std::vector<double>& ghat) {
  if (targets.empty()) throw_data("geodesic loss: no target pixels");
  if (targets.size() != ghat.size()) throw_usage("geodesic loss: raster length mismatch");
  const Var fr = sample_features(g, f1, {p1});
  const Var ft = sample_features(g, f2, targets);
  // ghat - d = ghat - 1 + ft.fr
  Tensor<S> offset({static_cast<int>(ghat.size()), 1});
  for (size_t i = 0; i < ghat.size(); ++i) offset[i] = static_cast<S>(ghat[i] - 1.0);
  const Var dots = matmul(g, ft, fr, true);
  return mean(g, softplus(g, add(g, dots, g.constant(std::move(offset)))));
}

template <typename S>
Var loss_dense_geodesic(Graph<S>& g, Var fmap, const MapPoint& ref,
                        const std::vector<MapPoint>& targets, const std::vector<double>& ghat) {
  return loss_cross_view(g, fmap, fmap, ref, targets, ghat);
}

// Mean hinge max(0, d(a, pos) - d(a, neg) + margin); anchors in F1,
// positives and negatives in F2.
template <typename S>
Var loss_triplet(Graph<S>& g, Var f1, Var f2, const std::vector<MapPoint>& anchors,
                 const std::vector<MapPoint>& positives, const std::vector<MapPoint>& negatives,
                 double margin) {
  if (anchors.empty()) throw_data("triplet loss: no anchors");
  if (anchors.size() != positives.size() || anchors.size() != negatives.size())
    throw_usage("triplet loss: point lists differ in length");
  const Var fa = sample_features(g, f1, anchors);
  const Var dpos = cosine_distance(g, fa, sample_features(g, f2, positives));
  const Var dneg = cosine_distance(g, fa, sample_features(g, f2, negatives));
  return mean(g, relu(g, affine(g, sub(g, dpos, dneg), S(1), static_cast<S>(margin))));
}

struct LossWeights {
  double c = 1.0;
  double s = 3.0;
  double d = 5.0;
  double cd = 3.0;
  double t = 1.0;  // triplet baseline
  double intermediate = 0.125;
};

// Which terms a run optimizes, parsed from "full", "triplet" or a '+'-joined
// subset of c, s, d, cd, t (e.g. "c+s+d").
struct LossSelection {
  bool c = false, s = false, d = false, cd = false, t = false;

  static LossSelection parse(const std::string& spec);
  std::string str() const;
  bool any() const { return c || s || d || cd || t; }
};

// Terms of one resolution level; absent terms contribute nothing.
struct LevelTerms {
  std::optional<Var> c, s, d, cd, t;
};

// Weighted sum at the finest level (last entry) plus intermediate times the
// same combination at each coarser level.
template <typename S>
Var total_loss(Graph<S>& g, const std::vector<LevelTerms>& levels, const LossWeights& w) {
  if (levels.empty()) throw_usage("total loss needs the finest level");
  std::optional<Var> total;
  auto accumulate = [&](const std::optional<Var>& term, double weight, double factor) {
    if (!term) return;
    const Var v = affine(g, *term, static_cast<S>(weight * factor));
    total = total ? add(g, *total, v) : v;
  };
  for (size_t i = 0; i < levels.size(); ++i) {
    const double factor = i + 1 == levels.size() ? 1.0 : w.intermediate;
    const LevelTerms& l = levels[i];
    accumulate(l.c, w.c, factor);
    accumulate(l.s, w.s, factor);
    accumulate(l.d, w.d, factor);
    accumulate(l.cd, w.cd, factor);
    accumulate(l.t, w.t, factor);
  }
  if (!total) return g.constant(Tensor<S>({1}));
  return *total;
}

// Plain-number version over (c, s, d, cd, t) tuples, coarse to fine.
double total_loss_value(const std::vector<std::array<double, 5>>& levels, const LossWeights& w);

}  // namespace geofeat

#endif  // GEOFEAT_GPS_LOSS_HPP_
