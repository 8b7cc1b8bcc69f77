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

#include <cmath>
#include <limits>

#include "doctest.h"
#include "geofeat/dataset.hpp"
#include "geofeat/error.hpp"
#include "geofeat/matchkit.hpp"
#include "test_util.hpp"

using namespace geofeat;

namespace {

FeatureMap random_features(Rng& rng, int h, int w, int c) {
  FeatureMap f({h, w, c});
  for (size_t r = 0; r < f.size() / c; ++r) {
    double ss = 0;
    std::vector<double> v(static_cast<size_t>(c));
    for (double& x : v) {
      x = rng.normal();
      ss += x * x;
    }
    for (int k = 0; k < c; ++k) f[r * c + k] = static_cast<float>(v[k] / std::sqrt(ss));
  }
  return f;
}

ByteImage full_mask(int w, int h) { return ByteImage(w, h, 1, 1); }

CorrespondenceField identity_field(int w, int h) {
  CorrespondenceField c;
  c.target = FloatImage(w, h, 2);
  c.valid = full_mask(w, h);
  c.visible = full_mask(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      c.target.at(x, y, 0) = static_cast<float>(x);
      c.target.at(x, y, 1) = static_cast<float>(y);
    }
  return c;
}

// Copy of f with pixel (x, y) moved to ((x + dx) mod w, y).
FeatureMap shifted(const FeatureMap& f, int dx) {
  FeatureMap out(f.shape);
  const int h = f.dim(0), w = f.dim(1), c = f.dim(2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k)
        out.data[(static_cast<size_t>(y) * w + (x + dx) % w) * c + k] =
            f.data[(static_cast<size_t>(y) * w + x) * c + k];
  return out;
}

struct OracleMatch {
  std::vector<int> target;  // row-major index in map 2, -1 off fg1
  std::vector<float> dist;
};

// Plain double loop, written independently of nn_match.
OracleMatch brute_force(const FeatureMap& f1, const FeatureMap& f2, const ByteImage& fg1,
                        const ByteImage& fg2) {
  const int n1 = f1.dim(0) * f1.dim(1), n2 = f2.dim(0) * f2.dim(1), c = f1.dim(2);
  OracleMatch m{std::vector<int>(static_cast<size_t>(n1), -1),
                std::vector<float>(static_cast<size_t>(n1), 0.0f)};
  for (int p = 0; p < n1; ++p) {
    if (!fg1.data[static_cast<size_t>(p)]) continue;
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (int q = 0; q < n2; ++q) {
      if (!fg2.data[static_cast<size_t>(q)]) continue;
      double dot = 0;
      for (int k = 0; k < c; ++k)
        dot += double(f1.data[static_cast<size_t>(p) * c + k]) *
               double(f2.data[static_cast<size_t>(q) * c + k]);
      const double d = 1.0 - dot;
      if (d < best) {
        best = d;
        arg = q;
      }
    }
    m.target[static_cast<size_t>(p)] = arg;
    m.dist[static_cast<size_t>(p)] = static_cast<float>(best);
  }
  return m;
}

}  // namespace

TEST_CASE("nn_match on identical maps is the identity") {
  Rng rng(1);
  const FeatureMap f = random_features(rng, 12, 10, 16);
  const MatchResult m = nn_match(f, f, full_mask(10, 12), full_mask(10, 12));
  CHECK(aepe(m.corr, identity_field(10, 12), AepeMode::kAll) == 0.0);
  for (float d : m.d_nn.data) CHECK(std::fabs(d) < 1e-6);
}

TEST_CASE("nn_match recovers a constructed shift") {
  Rng rng(2);
  const FeatureMap f = random_features(rng, 16, 20, 8);
  const MatchResult m = nn_match(f, shifted(f, 5), full_mask(20, 16), full_mask(20, 16));
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x + 5 < 20; ++x) {
      CHECK(m.corr.target.at(x, y, 0) - x == 5.0f);
      CHECK(m.corr.target.at(x, y, 1) == float(y));
    }
}

TEST_CASE("nn_match equals the brute-force oracle, ties included") {
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(static_cast<std::uint64_t>(trial), "nn-oracle");
    const FeatureMap f1 = random_features(rng, 16, 16, 8);
    FeatureMap f2 = random_features(rng, 16, 16, 8);
    // Duplicate some vectors of map 2 so exact ties occur.
    for (int i = 0; i < 40; ++i) {
      const size_t a = rng.below(256), b = rng.below(256);
      for (int k = 0; k < 8; ++k) f2[b * 8 + k] = f2[a * 8 + k];
    }
    ByteImage fg1(16, 16, 1), fg2(16, 16, 1);
    for (auto& v : fg1.data) v = rng.uniform() < 0.7;
    for (auto& v : fg2.data) v = rng.uniform() < 0.7;
    fg1.data[0] = fg2.data[0] = 1;
    const MatchResult m = nn_match(f1, f2, fg1, fg2);
    const OracleMatch o = brute_force(f1, f2, fg1, fg2);
    int mismatches = 0;
    for (int p = 0; p < 256; ++p) {
      if (!fg1.data[static_cast<size_t>(p)]) {
        mismatches += m.corr.valid.data[static_cast<size_t>(p)] != 0;
        continue;
      }
      const int t = static_cast<int>(m.corr.target.data[static_cast<size_t>(p) * 2 + 1]) * 16 +
                    static_cast<int>(m.corr.target.data[static_cast<size_t>(p) * 2]);
      mismatches += t != o.target[static_cast<size_t>(p)];
      mismatches += m.d_nn.data[static_cast<size_t>(p)] != o.dist[static_cast<size_t>(p)];
    }
    INFO("trial " << trial);
    CHECK(mismatches == 0);
  }
}

TEST_CASE("nn_match rejects empty masks and channel mismatches") {
  Rng rng(3);
  const FeatureMap f = random_features(rng, 4, 4, 4);
  const FeatureMap g = random_features(rng, 4, 4, 3);
  CHECK_THROWS_AS(nn_match(f, f, full_mask(4, 4), ByteImage(4, 4, 1, 0)), Error);
  CHECK_THROWS_AS(nn_match(f, g, full_mask(4, 4), full_mask(4, 4)), Error);
}

TEST_CASE("visibility map") {
  FeatureMap a({1, 2, 2}), b({1, 1, 2});
  a.data = {1, 0, -1, 0};
  b.data = {1, 0};
  const MatchResult m = nn_match(a, b, full_mask(2, 1), full_mask(1, 1));
  const FloatImage v = visibility_map(m);
  CHECK(v.at(0, 0) == 1.0f);
  CHECK(v.at(1, 0) == -1.0f);
  // Thresholding scores at tau equals thresholding d_nn at 1 - tau.
  Rng rng(4);
  const FeatureMap f1 = random_features(rng, 10, 10, 4), f2 = random_features(rng, 10, 10, 4);
  const MatchResult r = nn_match(f1, f2, full_mask(10, 10), full_mask(10, 10));
  const FloatImage s = visibility_map(r);
  for (double tau : {-0.5, 0.0, 0.3, 0.9})
    for (size_t i = 0; i < s.data.size(); ++i)
      CHECK((s.data[i] > tau) == (r.d_nn.data[i] < 1 - tau));
}

TEST_CASE("aepe examples") {
  const CorrespondenceField gt = identity_field(6, 4);
  CHECK(aepe(gt, gt, AepeMode::kNonOccluded) == 0.0);
  CorrespondenceField off = gt;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) {
      off.target.at(x, y, 0) += 3;
      off.target.at(x, y, 1) += 4;
    }
  CHECK(aepe(off, gt, AepeMode::kAll) == doctest::Approx(5.0));
  CorrespondenceField half = gt;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 6; ++x) half.target.at(x, y, 0) += 2;
  CHECK(aepe(half, gt, AepeMode::kAll) == doctest::Approx(1.0));
  // Only visible pixels count for "non".
  CorrespondenceField occ = gt;
  for (int x = 0; x < 6; ++x) occ.visible.at(x, 0) = 0;
  CHECK(aepe(half, occ, AepeMode::kNonOccluded) == doctest::Approx(2.0 / 3.0));
  CorrespondenceField none = gt;
  none.visible = ByteImage(6, 4, 1, 0);
  CHECK_THROWS_AS(aepe(gt, none, AepeMode::kNonOccluded), Error);
  CHECK(parse_aepe_mode("all") == AepeMode::kAll);
  CHECK_THROWS_AS(parse_aepe_mode("some"), Error);
}

TEST_CASE("aepe translation bound") {
  Rng rng(5);
  const CorrespondenceField gt = identity_field(8, 8);
  CorrespondenceField pred = gt;
  for (float& v : pred.target.data) v += static_cast<float>(rng.uniform(-3, 3));
  const double base = aepe(pred, gt, AepeMode::kAll);
  CorrespondenceField moved = pred;
  for (size_t i = 0; i < moved.target.data.size(); i += 2) {
    moved.target.data[i] += 1.5f;
    moved.target.data[i + 1] -= 2.0f;
  }
  CHECK(std::fabs(aepe(moved, gt, AepeMode::kAll) - base) <= 2.5 + 1e-6);
}

TEST_CASE("average precision examples") {
  CHECK(average_precision({0.1, 0.2, 0.8, 0.9}, {true, true, false, false}) == 1.0);
  CHECK(average_precision({0.5, 0.5, 0.5, 0.5}, {true, false, false, false}) ==
        doctest::Approx(0.25));
  Rng rng(6);
  std::vector<double> s;
  std::vector<bool> pos;
  for (int i = 0; i < 10000; ++i) {
    s.push_back(rng.uniform());
    pos.push_back(i % 2 == 0);
  }
  const double ap = average_precision(s, pos);
  CHECK(std::fabs(ap - 0.5) < 0.03);
  // Strictly monotone transforms keep the ranking and so the AP.
  std::vector<double> t;
  for (double v : s) t.push_back(std::exp(3 * v) - 7);
  CHECK(average_precision(t, pos) == ap);
  CHECK_THROWS_AS(average_precision({0.1, 0.2}, {true, true}), Error);

  FloatImage scores(2, 2, 1);
  scores.data = {0.9f, -0.5f, 0.7f, 0.0f};
  ByteImage occ(2, 2, 1), eval(2, 2, 1, 1);
  occ.data = {0, 1, 0, 1};
  CHECK(occlusion_ap(scores, occ, eval) == 1.0);
}

TEST_CASE("cycle error") {
  Rng rng(7);
  const FeatureMap f = random_features(rng, 12, 16, 8);
  const ByteImage m = full_mask(16, 12);
  const CorrespondenceField id = identity_field(16, 12);
  const CycleError same = cycle_error(f, f, f, m, m, m, id);
  CHECK(same.cascade == 0.0);
  CHECK(same.direct == 0.0);
  const CycleError shift = cycle_error(f, shifted(f, 5), f, m, m, m, id);
  CHECK(shift.cascade <= 1.0);
  CHECK(shift.direct == 0.0);
  const CycleError bil = cycle_error(f, shifted(f, 3), f, m, m, m, id, Composition::kBilinear);
  CHECK(bil.cascade <= 1.0);
}

TEST_CASE("composition of fields") {
  CorrespondenceField a = identity_field(4, 1), b = identity_field(4, 1);
  a.target.at(0, 0, 0) = 1.5f;
  for (int x = 0; x < 4; ++x) b.target.at(x, 0, 1) = 2.0f;
  const CorrespondenceField r = compose(a, b, Composition::kRound);
  const CorrespondenceField l = compose(a, b, Composition::kBilinear);
  CHECK(r.target.at(0, 0, 0) == 2.0f);
  CHECK(l.target.at(0, 0, 0) == 1.5f);
  CHECK(l.target.at(3, 0, 1) == 2.0f);
}

TEST_CASE("warp and morph on synthetic images") {
  Rng rng(8);
  FloatImage img(20, 14, 3);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  const CorrespondenceField id = identity_field(20, 14);
  CHECK(psnr(warp_image(img, id), img) > 50);

  CorrespondenceField sh = identity_field(20, 14);
  for (int y = 0; y < 14; ++y)
    for (int x = 0; x < 20; ++x) {
      sh.target.at(x, y, 0) = static_cast<float>(x + 3);
      sh.valid.at(x, y) = x + 3 < 20;
    }
  const FloatImage w = warp_image(img, sh);
  for (int y = 0; y < 14; ++y)
    for (int x = 0; x < 20; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(w.at(x, y, c) == (x + 3 < 20 ? img.at(x + 3, y, c) : 0.0f));

  FloatImage other(20, 14, 3);
  for (float& v : other.data) v = static_cast<float>(rng.uniform());
  CHECK(psnr(morph(img, other, sh, sh, 0.0), img) > 50);
  CHECK(psnr(morph(img, other, sh, sh, 1.0), other) > 50);
  CHECK(psnr(morph(img, img, id, id, 0.5), img) > 50);
  CHECK_THROWS_AS(morph(img, other, id, id, 1.5), Error);
}

TEST_CASE("ground-truth warp reproduces the first view") {
  const auto dir = testing::scratch_dir("warp_gt");
  Config c;
  c.set("pairs", "3");
  c.set("seed", "9");
  c.set("width", "128");
  c.set("height", "192");
  c.set("focal", "250");
  generate_dataset(DatasetConfig::from_config(c), dir.string());
  const Manifest m = load_manifest((dir / "manifest.tsv").string());
  for (size_t i = 0; i < m.size(); ++i) {
    const PairData p = load_pair(m, i);
    const FloatImage w = warp_image(p.view2.rgb, p.c12);
    double err = 0;
    size_t n = 0;
    for (int y = 0; y < w.height; ++y)
      for (int x = 0; x < w.width; ++x) {
        if (!p.c12.visible.at(x, y)) continue;
        for (int k = 0; k < 3; ++k) err += std::fabs(w.at(x, y, k) - p.view1.rgb.at(x, y, k));
        n += 3;
      }
    MESSAGE("pair " << i << " mean abs error " << err / double(n));
    CHECK(err / double(n) < 0.05);
  }
}

TEST_CASE("distance heatmap") {
  Rng rng(9);
  const FeatureMap f = random_features(rng, 9, 11, 8);
  ByteImage fg = full_mask(11, 9);
  fg.at(0, 0) = 0;
  const FloatImage h = distance_heatmap(f, 4, 6, f, fg);
  CHECK(std::isnan(h.at(0, 0)));
  int best = -1;
  float bd = 10;
  for (int i = 0; i < 99; ++i)
    if (!std::isnan(h.data[static_cast<size_t>(i)]) && h.data[static_cast<size_t>(i)] < bd) {
      bd = h.data[static_cast<size_t>(i)];
      best = i;
    }
  CHECK(best == 6 * 11 + 4);
  CHECK_THROWS_AS(distance_heatmap(f, 11, 0, f, fg), Error);
}
