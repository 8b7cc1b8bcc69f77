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

#ifndef GEOFEAT_MATCHKIT_HPP_
#define GEOFEAT_MATCHKIT_HPP_

#include <string>
#include <utility>
#include <vector>

#include "geofeat/image_io.hpp"
#include "geofeat/synth.hpp"
#include "geofeat/tensor.hpp"

namespace geofeat {

// Per-pixel unit feature vectors, shape [H, W, C].
using FeatureMap = Tensor<float>;

// 1 - a.b accumulated in double in channel order. Throws a numeric error
// when either vector is off the unit sphere by more than 1e-4.
double cosine_distance(const float* a, const float* b, int channels);

struct MatchResult {
  CorrespondenceField corr;  // targets are foreground pixels of the other map
  FloatImage d_nn;           // NaN off the source foreground
};

// Exhaustive nearest neighbor over fg2 for every fg1 pixel. Ties go to the
// smallest row-major index in map 2.
MatchResult nn_match(const FeatureMap& f1, const FeatureMap& f2, const ByteImage& fg1,
                     const ByteImage& fg2);

// 1 - d_nn; NaN off the foreground.
FloatImage visibility_map(const MatchResult& match);

enum class AepeMode { kNonOccluded, kAll };
AepeMode parse_aepe_mode(const std::string& s);

// Mean end-point error over gt-visible pixels (non) or gt-valid pixels (all).
double aepe(const CorrespondenceField& pred, const CorrespondenceField& gt, AepeMode mode);

// Area under the precision/recall curve for "occluded" predicted by
// score < tau, sweeping tau over the distinct scores; trapezoidal rule with
// the curve extended flat to recall 0. Only pixels with eval != 0 count.
double occlusion_ap(const FloatImage& scores, const ByteImage& occluded, const ByteImage& eval);
// Same on plain arrays.
double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive);

enum class Composition { kRound, kBilinear };

// Chains c12 and c23 into a field from view 1 to view 3.
CorrespondenceField compose(const CorrespondenceField& c12, const CorrespondenceField& c23,
                            Composition mode);

struct CycleError {
  double cascade = 0;
  double direct = 0;
};

// Cascade (1->2->3) and direct (1->3) NN matches scored against gt13 on
// its visible pixels.
CycleError cycle_error(const FeatureMap& f1, const FeatureMap& f2, const FeatureMap& f3,
                       const ByteImage& fg1, const ByteImage& fg2, const ByteImage& fg3,
                       const CorrespondenceField& gt13,
                       Composition mode = Composition::kRound);

// Bilinear sample with edge clamping.
void sample_bilinear(const FloatImage& image, double x, double y, float* out);

// out(p) = src sampled at corr target(p) on valid pixels, black elsewhere.
FloatImage warp_image(const FloatImage& src, const CorrespondenceField& corr);

// Warp-and-blend frame at t in [0, 1]. Pixel p takes I1 at p - t*f12(p) and
// I2 at p - (1-t)*f21(p), blended (1-t, t); invalid flow counts as zero.
FloatImage morph(const FloatImage& i1, const FloatImage& i2, const CorrespondenceField& c12,
                 const CorrespondenceField& c21, double t);

// Feature distance from one probe pixel to every pixel of a map; NaN off fg.
FloatImage distance_heatmap(const FeatureMap& f1, int px, int py, const FeatureMap& f2,
                            const ByteImage& fg2);

double psnr(const FloatImage& a, const FloatImage& b, const ByteImage* mask = nullptr);

}  // namespace geofeat

#endif  // GEOFEAT_MATCHKIT_HPP_
