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

#include "geofeat/matchkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "geofeat/error.hpp"

namespace geofeat {

namespace {

constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();

void check_map(const FeatureMap& f, const char* what) {
  if (f.rank() != 3) throw_usage(std::string(what) + " must be an [H, W, C] map");
}

void check_mask(const FeatureMap& f, const ByteImage& m, const char* what) {
  if (m.width != f.dim(1) || m.height != f.dim(0))
    throw_usage(std::string(what) + " does not match its feature map size");
}

template <typename A, typename B>
bool same_dims(const Raster<A>& a, const Raster<B>& b) {
  return a.width == b.width && a.height == b.height;
}

CorrespondenceField empty_field(int w, int h) {
  CorrespondenceField c;
  c.target = FloatImage(w, h, 2, kNaN);
  c.valid = ByteImage(w, h, 1, 0);
  c.visible = ByteImage(w, h, 1, 0);
  return c;
}

}  // namespace

double cosine_distance(const float* a, const float* b, int channels) {
  double na = 0, nb = 0, dot = 0;
  for (int k = 0; k < channels; ++k) {
    na += double(a[k]) * a[k];
    nb += double(b[k]) * b[k];
    dot += double(a[k]) * b[k];
  }
  if (std::fabs(std::sqrt(na) - 1) > 1e-4 || std::fabs(std::sqrt(nb) - 1) > 1e-4)
    throw_numeric("cosine distance needs unit vectors");
  return 1.0 - dot;
}

MatchResult nn_match(const FeatureMap& f1, const FeatureMap& f2, const ByteImage& fg1,
                     const ByteImage& fg2) {
  check_map(f1, "first feature map");
  check_map(f2, "second feature map");
  check_mask(f1, fg1, "first mask");
  check_mask(f2, fg2, "second mask");
  const int c = f1.dim(2);
  if (f2.dim(2) != c) throw_usage("feature maps have different channel counts");
  const int w1 = f1.dim(1), h1 = f1.dim(0), w2 = f2.dim(1), h2 = f2.dim(0);

  std::vector<int> cand;
  for (int i = 0; i < w2 * h2; ++i)
    if (fg2.data[static_cast<size_t>(i)]) cand.push_back(i);
  bool any1 = false;
  for (auto v : fg1.data) any1 = any1 || v;
  if (cand.empty() || !any1) throw_data("nn_match: empty foreground mask");

  // Channel-major copy of the candidates so the inner loop runs over
  // candidates; each candidate still sums its channels in order.
  const size_t nq = cand.size();
  std::vector<double> cols(static_cast<size_t>(c) * nq);
  for (size_t q = 0; q < nq; ++q)
    for (int k = 0; k < c; ++k)
      cols[static_cast<size_t>(k) * nq + q] = f2.data[static_cast<size_t>(cand[q]) * c + k];

  MatchResult r;
  r.corr = empty_field(w1, h1);
  r.d_nn = FloatImage(w1, h1, 1, kNaN);
  std::vector<double> acc(nq);
  for (int y = 0; y < h1; ++y)
    for (int x = 0; x < w1; ++x) {
      if (!fg1.at(x, y)) continue;
      const float* a = &f1.data[(static_cast<size_t>(y) * w1 + x) * c];
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int k = 0; k < c; ++k) {
        const double ak = a[k];
        const double* col = &cols[static_cast<size_t>(k) * nq];
        for (size_t q = 0; q < nq; ++q) acc[q] += ak * col[q];
      }
      size_t best = 0;
      double best_d = 1.0 - acc[0];
      for (size_t q = 1; q < nq; ++q) {
        const double d = 1.0 - acc[q];
        if (d < best_d) {
          best_d = d;
          best = q;
        }
      }
      r.corr.target.at(x, y, 0) = static_cast<float>(cand[best] % w2);
      r.corr.target.at(x, y, 1) = static_cast<float>(cand[best] / w2);
      r.corr.valid.at(x, y) = 1;
      r.corr.visible.at(x, y) = 1;
      r.d_nn.at(x, y) = static_cast<float>(best_d);
    }
  return r;
}

FloatImage visibility_map(const MatchResult& match) {
  FloatImage out = match.d_nn;
  for (float& v : out.data)
    if (!std::isnan(v)) v = 1.0f - v;
  return out;
}

AepeMode parse_aepe_mode(const std::string& s) {
  if (s == "non") return AepeMode::kNonOccluded;
  if (s == "all") return AepeMode::kAll;
  throw_usage("AEPE mode must be 'non' or 'all', got '" + s + "'");
}

double aepe(const CorrespondenceField& pred, const CorrespondenceField& gt, AepeMode mode) {
  if (!pred.valid.same_size(gt.valid)) throw_usage("aepe: field sizes differ");
  const ByteImage& mask = mode == AepeMode::kNonOccluded ? gt.visible : gt.valid;
  double sum = 0;
  size_t n = 0;
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x) {
      if (!mask.at(x, y)) continue;
      if (!pred.valid.at(x, y)) throw_data("aepe: prediction missing on an evaluated pixel");
      sum += std::hypot(double(pred.target.at(x, y, 0)) - gt.target.at(x, y, 0),
                        double(pred.target.at(x, y, 1)) - gt.target.at(x, y, 1));
      ++n;
    }
  if (n == 0) throw_data("aepe: empty evaluation set");
  return sum / static_cast<double>(n);
}

double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw_usage("average_precision: size mismatch");
  const size_t total_pos = static_cast<size_t>(std::count(positive.begin(), positive.end(), true));
  if (total_pos == 0 || total_pos == scores.size())
    throw_data("average precision needs both classes present");
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double ap = 0, prev_recall = 0, prev_precision = -1;
  size_t tp = 0, taken = 0;
  for (size_t i = 0; i < order.size();) {
    // All items sharing a score enter together.
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += positive[order[j]] ? 1 : 0;
      ++j;
    }
    taken = j;
    const double recall = double(tp) / double(total_pos);
    const double precision = double(tp) / double(taken);
    if (prev_precision < 0) prev_precision = precision;
    ap += (recall - prev_recall) * 0.5 * (precision + prev_precision);
    prev_recall = recall;
    prev_precision = precision;
    i = j;
  }
  return ap;
}

double occlusion_ap(const FloatImage& scores, const ByteImage& occluded, const ByteImage& eval) {
  if (!same_dims(scores, occluded) || !same_dims(scores, eval))
    throw_usage("occlusion_ap: raster sizes differ");
  std::vector<double> s;
  std::vector<bool> pos;
  for (int y = 0; y < scores.height; ++y)
    for (int x = 0; x < scores.width; ++x) {
      if (!eval.at(x, y)) continue;
      const float v = scores.at(x, y);
      if (std::isnan(v)) throw_data("occlusion_ap: missing score on an evaluated pixel");
      s.push_back(v);
      pos.push_back(occluded.at(x, y) != 0);
    }
  return average_precision(s, pos);
}

CorrespondenceField compose(const CorrespondenceField& c12, const CorrespondenceField& c23,
                            Composition mode) {
  CorrespondenceField out = empty_field(c12.width(), c12.height());
  for (int y = 0; y < c12.height(); ++y)
    for (int x = 0; x < c12.width(); ++x) {
      if (!c12.valid.at(x, y)) continue;
      const double tx = c12.target.at(x, y, 0), ty = c12.target.at(x, y, 1);
      double ox = 0, oy = 0;
      bool ok = false;
      if (mode == Composition::kRound) {
        const int qx = static_cast<int>(std::lround(tx)), qy = static_cast<int>(std::lround(ty));
        if (c23.valid.inside(qx, qy) && c23.valid.at(qx, qy)) {
          ox = c23.target.at(qx, qy, 0);
          oy = c23.target.at(qx, qy, 1);
          ok = true;
        }
      } else {
        const int x0 = static_cast<int>(std::floor(tx)), y0 = static_cast<int>(std::floor(ty));
        const double fx = tx - x0, fy = ty - y0;
        double wsum = 0;
        for (int dy = 0; dy <= 1; ++dy)
          for (int dx = 0; dx <= 1; ++dx) {
            const int qx = x0 + dx, qy = y0 + dy;
            const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy);
            if (w <= 0 || !c23.valid.inside(qx, qy) || !c23.valid.at(qx, qy)) continue;
            ox += w * c23.target.at(qx, qy, 0);
            oy += w * c23.target.at(qx, qy, 1);
            wsum += w;
          }
        if (wsum > 0) {
          ox /= wsum;
          oy /= wsum;
          ok = true;
        }
      }
      if (!ok) continue;
      out.target.at(x, y, 0) = static_cast<float>(ox);
      out.target.at(x, y, 1) = static_cast<float>(oy);
      out.valid.at(x, y) = 1;
      out.visible.at(x, y) = 1;
    }
  return out;
}

CycleError cycle_error(const FeatureMap& f1, const FeatureMap& f2, const FeatureMap& f3,
                       const ByteImage& fg1, const ByteImage& fg2, const ByteImage& fg3,
                       const CorrespondenceField& gt13, Composition mode) {
  const MatchResult m12 = nn_match(f1, f2, fg1, fg2);
  const MatchResult m23 = nn_match(f2, f3, fg2, fg3);
  const MatchResult m13 = nn_match(f1, f3, fg1, fg3);
  CorrespondenceField cascade = compose(m12.corr, m23.corr, mode);
  // Every fg2 pixel has a match, so composition never drops a pixel.
  CycleError e;
  e.cascade = aepe(cascade, gt13, AepeMode::kNonOccluded);
  e.direct = aepe(m13.corr, gt13, AepeMode::kNonOccluded);
  return e;
}

void sample_bilinear(const FloatImage& image, double x, double y, float* out) {
  x = std::clamp(x, 0.0, image.width - 1.0);
  y = std::clamp(y, 0.0, image.height - 1.0);
  const int x0 = std::min(static_cast<int>(x), image.width - 1);
  const int y0 = std::min(static_cast<int>(y), image.height - 1);
  const int x1 = std::min(x0 + 1, image.width - 1), y1 = std::min(y0 + 1, image.height - 1);
  const double fx = x - x0, fy = y - y0;
  for (int c = 0; c < image.channels; ++c)
    out[c] = static_cast<float>(
        (1 - fy) * ((1 - fx) * image.at(x0, y0, c) + fx * image.at(x1, y0, c)) +
        fy * ((1 - fx) * image.at(x0, y1, c) + fx * image.at(x1, y1, c)));
}

FloatImage warp_image(const FloatImage& src, const CorrespondenceField& corr) {
  FloatImage out(corr.width(), corr.height(), src.channels, 0.0f);
  for (int y = 0; y < corr.height(); ++y)
    for (int x = 0; x < corr.width(); ++x)
      if (corr.valid.at(x, y))
        sample_bilinear(src, corr.target.at(x, y, 0), corr.target.at(x, y, 1), &out.at(x, y, 0));
  return out;
}

FloatImage morph(const FloatImage& i1, const FloatImage& i2, const CorrespondenceField& c12,
                 const CorrespondenceField& c21, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw_usage("morph: t must lie in [0, 1]");
  if (!i1.same_size(i2) || !same_dims(i1, c12.valid) || !same_dims(i1, c21.valid) ||
      i1.channels != i2.channels)
    throw_usage("morph: images and fields must share one size");
  FloatImage out(i1.width, i1.height, i1.channels);
  std::vector<float> a(static_cast<size_t>(i1.channels)), b(a.size());
  for (int y = 0; y < i1.height; ++y)
    for (int x = 0; x < i1.width; ++x) {
      double fx = 0, fy = 0, gx = 0, gy = 0;
      if (c12.valid.at(x, y)) {
        fx = c12.target.at(x, y, 0) - x;
        fy = c12.target.at(x, y, 1) - y;
      }
      if (c21.valid.at(x, y)) {
        gx = c21.target.at(x, y, 0) - x;
        gy = c21.target.at(x, y, 1) - y;
      }
      sample_bilinear(i1, x - t * fx, y - t * fy, a.data());
      sample_bilinear(i2, x - (1 - t) * gx, y - (1 - t) * gy, b.data());
      for (int c = 0; c < i1.channels; ++c)
        out.at(x, y, c) = static_cast<float>((1 - t) * a[static_cast<size_t>(c)] +
                                             t * b[static_cast<size_t>(c)]);
    }
  return out;
}

FloatImage distance_heatmap(const FeatureMap& f1, int px, int py, const FeatureMap& f2,
                            const ByteImage& fg2) {
  check_map(f1, "first feature map");
  check_map(f2, "second feature map");
  check_mask(f2, fg2, "mask");
  if (px < 0 || py < 0 || px >= f1.dim(1) || py >= f1.dim(0))
    throw_usage("probe pixel outside the image");
  const int c = f1.dim(2);
  if (f2.dim(2) != c) throw_usage("feature maps have different channel counts");
  const float* a = &f1.data[(static_cast<size_t>(py) * f1.dim(1) + px) * c];
  FloatImage out(f2.dim(1), f2.dim(0), 1, kNaN);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      if (!fg2.at(x, y)) continue;
      const float* b = &f2.data[(static_cast<size_t>(y) * out.width + x) * c];
      double dot = 0;
      for (int k = 0; k < c; ++k) dot += double(a[k]) * b[k];
      out.at(x, y) = static_cast<float>(1.0 - dot);
    }
  return out;
}

double psnr(const FloatImage& a, const FloatImage& b, const ByteImage* mask) {
  if (!a.same_size(b) || a.channels != b.channels) throw_usage("psnr: size mismatch");
  double se = 0;
  size_t n = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      if (mask && !mask->at(x, y)) continue;
      for (int c = 0; c < a.channels; ++c) {
        const double d = double(a.at(x, y, c)) - b.at(x, y, c);
        se += d * d;
        ++n;
      }
    }
  if (n == 0) throw_data("psnr: empty region");
  const double mse = se / static_cast<double>(n);
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace geofeat
