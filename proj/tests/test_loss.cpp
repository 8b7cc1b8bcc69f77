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
#include <filesystem>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "geofeat/dataset.hpp"
#include "geofeat/error.hpp"
#include "geofeat/gps_loss.hpp"
#include "geofeat/matchkit.hpp"
#include "geofeat/train.hpp"
#include "grad_check.hpp"
#include "test_util.hpp"

using namespace geofeat;
using namespace geofeat::testing;

namespace {

const double kLn2 = std::log(2.0);
const double kSoftplusMinus2 = std::log1p(std::exp(-2.0));

// Unit vectors in random directions, [1, h, w, c].
Tensor<double> random_unit_map(Rng& rng, int h, int w, int c) {
  Tensor<double> t({1, h, w, c});
  for (size_t r = 0; r < t.size() / c; ++r) {
    double ss = 0;
    for (int k = 0; k < c; ++k) {
      t[r * c + k] = rng.normal();
      ss += t[r * c + k] * t[r * c + k];
    }
    for (int k = 0; k < c; ++k) t[r * c + k] /= std::sqrt(ss);
  }
  return t;
}

std::vector<MapPoint> all_pixels(int h, int w) {
  std::vector<MapPoint> p;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) p.push_back({0, double(x), double(y)});
  return p;
}

Tensor<double> negated(Tensor<double> t) {
  for (double& v : t.data) v = -v;
  return t;
}

double dot_at(const Tensor<double>& f, int x1, int y1, int x2, int y2) {
  const int c = f.dim(3);
  double s = 0;
  for (int k = 0; k < c; ++k) s += f.at(0, y1, x1, k) * f.at(0, y2, x2, k);
  return s;
}

}  // namespace

TEST_CASE("cosine distance examples") {
  const float a[3] = {1, 0, 0}, b[3] = {-1, 0, 0}, c[3] = {0, 1, 0}, bad[3] = {2, 0, 0};
  CHECK(cosine_distance(a, a, 3) == 0.0);
  CHECK(cosine_distance(a, b, 3) == 2.0);
  CHECK(cosine_distance(a, c, 3) == 1.0);
  CHECK_THROWS_AS(cosine_distance(a, bad, 3), Error);

  Graph<double> g;
  Tensor<double> u({3, 3});
  u.data = {1, 0, 0, 1, 0, 0, 1, 0, 0};
  Tensor<double> v({3, 3});
  v.data = {1, 0, 0, -1, 0, 0, 0, 1, 0};
  const Tensor<double>& d = g.value(cosine_distance(g, g.leaf(u), g.leaf(v)));
  CHECK(d.data == AlignedVector<double>{0.0, 2.0, 1.0});
}

TEST_CASE("consistency loss examples") {
  Rng rng(1);
  const Tensor<double> f = random_unit_map(rng, 8, 8, 16);
  const auto pts = all_pixels(8, 8);
  {
    Graph<double> g;
    const Var a = g.leaf(f), b = g.leaf(f);
    CHECK(g.value(loss_consistency(g, a, b, pts, pts))[0] == doctest::Approx(0.0).epsilon(1e-12));
  }
  {
    Graph<double> g;
    CHECK(g.value(loss_consistency(g, g.leaf(f), g.leaf(negated(f)), pts, pts))[0] ==
          doctest::Approx(2.0).epsilon(1e-12));
  }
  {
    // Independent random unit vectors in 16 dimensions have E[1 - a.b] = 1.
    const Tensor<double> f1 = random_unit_map(rng, 100, 120, 16);
    const Tensor<double> f2 = random_unit_map(rng, 100, 120, 16);
    const auto p1 = all_pixels(100, 120);
    std::vector<MapPoint> p2;
    for (size_t i = 0; i < p1.size(); ++i)
      p2.push_back({0, rng.uniform(0, 119), rng.uniform(0, 99)});
    Graph<double> g;
    CHECK(std::fabs(g.value(loss_consistency(g, g.leaf(f1), g.leaf(f2), p1, p2))[0] - 1.0) <
          0.05);
  }
  Graph<double> g;
  CHECK_THROWS_AS(loss_consistency(g, g.leaf(f), g.leaf(f), {}, {}), Error);
}

TEST_CASE("sparse ordinal loss examples") {
  // Pixel (0,0) and (1,0) share a feature; (2,0) is antipodal to (0,0).
  Tensor<double> f({1, 1, 3, 2});
  f.data = {1, 0, 1, 0, -1, 0};
  Graph<double> g;
  const Var fv = g.leaf(f);
  const MapPoint r{0, 0, 0}, same{0, 1, 0}, far{0, 2, 0};
  // Equal feature distances: log 2 whatever the sign.
  CHECK(g.value(loss_sparse_ordinal(g, fv, {{r, same, r, 1.0, 2.0}}))[0] ==
        doctest::Approx(kLn2).epsilon(1e-12));
  // s = +1, d1 = 0, d2 = 2.
  const double v = g.value(loss_sparse_ordinal(g, fv, {{r, same, far, 1.0, 2.0}}))[0];
  CHECK(std::fabs(v - kSoftplusMinus2) < 1e-12);
  CHECK(std::fabs(v - 0.1269) < 1e-4);
  // Swapping t1 and t2 flips s too.
  const double w = g.value(loss_sparse_ordinal(g, fv, {{r, far, same, 2.0, 1.0}}))[0];
  CHECK(w == doctest::Approx(v).epsilon(1e-14));
  // Geodesic ties are skipped and counted.
  int skipped = -1;
  const double t = g.value(loss_sparse_ordinal(
      g, fv, {{r, same, far, 1.0, 2.0}, {r, far, same, 3.0, 3.0}}, &skipped))[0];
  CHECK(skipped == 1);
  CHECK(t == doctest::Approx(v).epsilon(1e-14));
  CHECK_THROWS_AS(loss_sparse_ordinal(g, fv, {{r, far, same, 3.0, 3.0}}), Error);
}

TEST_CASE("dense geodesic loss examples") {
  Rng rng(2);
  const Tensor<double> f = random_unit_map(rng, 8, 8, 4);
  const auto targets = all_pixels(8, 8);
  const MapPoint ref{0, 3, 5};
  std::vector<double> ghat;
  for (const auto& t : targets) ghat.push_back(1.0 - dot_at(f, 3, 5, int(t.x), int(t.y)));
  {
    Graph<double> g;
    const double v = g.value(loss_dense_geodesic(g, g.leaf(f), ref, targets, ghat))[0];
    CHECK(std::fabs(v - kLn2) < 1e-6);
  }
  {
    // Every target antipodal to the reference, zero geodesic distance.
    Tensor<double> h({1, 2, 2, 3});
    h.data = {0, 0, 1, 0, 0, -1, 0, 0, -1, 0, 0, -1};
    const std::vector<MapPoint> tg{{0, 1, 0}, {0, 0, 1}, {0, 1, 1}};
    Graph<double> g;
    const double v =
        g.value(loss_dense_geodesic(g, g.leaf(h), {0, 0, 0}, tg, {0.0, 0.0, 0.0}))[0];
    CHECK(std::fabs(v - kSoftplusMinus2) < 1e-12);
  }
  {
    // Permuting targets leaves the mean unchanged.
    std::vector<size_t> perm(targets.size());
    std::iota(perm.begin(), perm.end(), size_t{0});
    Rng prng(3);
    for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[prng.below(i)]);
    std::vector<MapPoint> pt;
    std::vector<double> pg;
    for (size_t i : perm) {
      pt.push_back(targets[i]);
      pg.push_back(ghat[i] * 0.5);
    }
    std::vector<double> half(ghat);
    for (double& x : half) x *= 0.5;
    Graph<double> g;
    const Var fv = g.leaf(f);
    CHECK(g.value(loss_dense_geodesic(g, fv, ref, targets, half))[0] ==
          doctest::Approx(g.value(loss_dense_geodesic(g, fv, ref, pt, pg))[0]).epsilon(1e-13));
  }
}

TEST_CASE("dense geodesic loss does not increase with feature distance") {
  // Rotate one target's feature away from the reference in small steps.
  Tensor<double> f({1, 1, 2, 2});
  const double pi = 3.14159265358979323846;
  double prev = 1e9;
  for (int i = 0; i <= 20; ++i) {
    const double a = pi * i / 20;
    f.data = {1, 0, std::cos(a), std::sin(a)};
    Graph<double> g;
    const double v = g.value(loss_dense_geodesic(g, g.leaf(f), {0, 0, 0}, {{0, 1, 0}}, {0.7}))[0];
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("cross-view loss examples") {
  Rng rng(4);
  const Tensor<double> f = random_unit_map(rng, 8, 8, 4);
  const auto targets = all_pixels(8, 8);
  std::vector<double> ghat;
  for (size_t i = 0; i < targets.size(); ++i) ghat.push_back(rng.uniform(0, 2));
  const MapPoint p1{0, 2, 6};
  Graph<double> g;
  const Var a = g.leaf(f), b = g.leaf(f);
  const double cross = g.value(loss_cross_view(g, a, b, p1, targets, ghat))[0];
  const double dense = g.value(loss_dense_geodesic(g, a, p1, targets, ghat))[0];
  CHECK(std::fabs(cross - dense) < 1e-6);
  // The term at corr(p1) itself: same feature, zero geodesic distance.
  const double single = g.value(loss_cross_view(g, a, b, p1, {p1}, {0.0}))[0];
  CHECK(std::fabs(single - kLn2) < 1e-12);
  CHECK_THROWS_AS(loss_cross_view(g, a, b, p1, {}, {}), Error);
}

TEST_CASE("triplet baseline examples") {
  // anchor a, positive equal to a, negatives at distance 1 and 0.5 and 1.5.
  Tensor<double> f({1, 1, 5, 2});
  const double c60 = 0.5, s60 = std::sqrt(0.75);
  f.data = {1, 0, 1, 0, 0, 1, c60, s60, -c60, s60};
  Graph<double> g;
  const Var fv = g.leaf(f);
  const MapPoint a{0, 0, 0}, pos{0, 1, 0}, neg1{0, 2, 0}, neg05{0, 3, 0}, neg15{0, 4, 0};
  CHECK(g.value(loss_triplet(g, fv, fv, {a}, {pos}, {neg1}, 0.2))[0] == 0.0);
  // positive at distance 1.0, negative at 0.5.
  CHECK(g.value(loss_triplet(g, fv, fv, {a}, {neg1}, {neg05}, 0.2))[0] ==
        doctest::Approx(0.7).epsilon(1e-12));
  // Farther negative, smaller loss.
  const double near = g.value(loss_triplet(g, fv, fv, {a}, {neg1}, {neg05}, 0.2))[0];
  const double far = g.value(loss_triplet(g, fv, fv, {a}, {neg1}, {neg15}, 0.2))[0];
  CHECK(far < near);
  CHECK(far == 0.0);
}

TEST_CASE("total loss") {
  const LossWeights w;
  CHECK(total_loss_value({{0, 0, 0, 0, 0}}, w) == 0.0);
  CHECK(total_loss_value({{1, 1, 1, 1, 0}}, w) == 12.0);
  CHECK(total_loss_value({{1, 2, 3, 4, 0}, {1, 2, 3, 4, 0}}, w) ==
        total_loss_value({{1, 2, 3, 4, 0}}, w) * (1 + 0.125));
  LossWeights w2 = w;
  w2.d *= 2;
  const double base = total_loss_value({{0.3, 0.1, 0.7, 0.2, 0}}, w);
  const double doubled = total_loss_value({{0.3, 0.1, 0.7, 0.2, 0}}, w2);
  CHECK(doubled - base == 5.0 * 0.7);

  Graph<float> g;
  auto one = [&] { return g.constant(Tensor<float>({1}, 1.0f)); };
  LevelTerms t;
  t.c = one();
  t.s = one();
  t.d = one();
  t.cd = one();
  CHECK(g.value(total_loss(g, {t}, w))[0] == 12.0f);
  CHECK(g.value(total_loss(g, {t, t}, w))[0] == 12.0f + 12.0f / 8);
  CHECK(g.value(total_loss(g, {LevelTerms{}}, w))[0] == 0.0f);
  CHECK_THROWS_AS(total_loss(g, {}, w), Error);
}

TEST_CASE("loss selection") {
  CHECK(LossSelection::parse("full").str() == "full");
  CHECK(LossSelection::parse("triplet").str() == "triplet");
  const LossSelection s = LossSelection::parse("c+s+d");
  CHECK((s.c && s.s && s.d && !s.cd && !s.t));
  CHECK(LossSelection::parse("d+c").str() == "c+d");
  CHECK_THROWS_AS(LossSelection::parse("c+q"), Error);
  CHECK_THROWS_AS(LossSelection::parse(""), Error);
}

TEST_CASE("finite-difference gradients of every loss") {
  const std::vector<int> probe{1, 8, 8, 4};
  auto one_map = [&](Rng& r) { return std::vector{random_tensor(r, probe)}; };
  auto two_maps = [&](Rng& r) {
    return std::vector{random_tensor(r, probe), random_tensor(r, probe)};
  };
  auto points = [](std::uint64_t seed, int n) {
    Rng r(seed);
    std::vector<MapPoint> p;
    for (int i = 0; i < n; ++i) p.push_back({0, r.uniform(0, 7), r.uniform(0, 7)});
    return p;
  };
  check_op("consistency", two_maps, [&](Graph<double>& g, const std::vector<Var>& v) {
    return loss_consistency(g, v[0], v[1], points(1, 12), points(2, 12));
  });
  check_op("sparse ordinal", one_map, [&](Graph<double>& g, const std::vector<Var>& v) {
    const auto r = points(3, 10), a = points(4, 10), b = points(5, 10);
    std::vector<OrdinalTriplet> t;
    Rng gr(6);
    for (int i = 0; i < 10; ++i) t.push_back({r[i], a[i], b[i], gr.uniform(), gr.uniform()});
    return loss_sparse_ordinal(g, v[0], t);
  });
  auto ghat = [](int n) {
    Rng r(7);
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(r.uniform(0, 2));
    return out;
  };
  check_op("dense geodesic", one_map, [&](Graph<double>& g, const std::vector<Var>& v) {
    return loss_dense_geodesic(g, v[0], {0, 2.5, 4.25}, points(8, 20), ghat(20));
  });
  check_op("cross view", two_maps, [&](Graph<double>& g, const std::vector<Var>& v) {
    return loss_cross_view(g, v[0], v[1], {0, 6, 1}, points(9, 20), ghat(20));
  });
  // Small step: the hinge has a kink.
  check_op("triplet", two_maps, [&](Graph<double>& g, const std::vector<Var>& v) {
    return loss_triplet(g, v[0], v[1], points(10, 16), points(11, 16), points(12, 16), 0.2);
  }, 1e-6);
  check_op("total", two_maps, [&](Graph<double>& g, const std::vector<Var>& v) {
    LevelTerms fine, coarse;
    fine.c = loss_consistency(g, v[0], v[1], points(1, 12), points(2, 12));
    fine.d = loss_dense_geodesic(g, v[0], {0, 2.5, 4.25}, points(8, 20), ghat(20));
    coarse.cd = loss_cross_view(g, v[0], v[1], {0, 6, 1}, points(9, 20), ghat(20));
    return total_loss(g, {coarse, fine}, LossWeights{});
  });
}

TEST_CASE("cross-view gradient at the reference feature") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed, "cross-ref");
    const auto f1 = random_tensor(rng, {1, 8, 8, 4});
    const auto f2 = random_tensor(rng, {1, 8, 8, 4});
    std::vector<MapPoint> targets = all_pixels(8, 8);
    std::vector<double> gh;
    for (size_t i = 0; i < targets.size(); ++i) gh.push_back(rng.uniform(0, 2));
    auto value = [&](const Tensor<double>& a) {
      Graph<double> g;
      return g.value(loss_cross_view(g, g.leaf(a), g.leaf(f2), {0, 3, 4}, targets, gh))[0];
    };
    Graph<double> g;
    const Var a = g.leaf(f1);
    g.backward(loss_cross_view(g, a, g.leaf(f2), {0, 3, 4}, targets, gh));
    const Tensor<double> grad = g.grad(a);
    double worst = 0;
    for (int k = 0; k < 4; ++k) {
      auto plus = f1, minus = f1;
      plus.at(0, 4, 3, k) += 1e-3;
      minus.at(0, 4, 3, k) -= 1e-3;
      const double num = (value(plus) - value(minus)) / 2e-3;
      const double an = grad.at(0, 4, 3, k);
      worst = std::max(worst, std::fabs(num - an) / std::max({std::fabs(num), std::fabs(an), 1e-4}));
    }
    CHECK(worst < 1e-3);
  }
}

namespace {

// Tiny generated dataset shared by the training tests.
const Manifest& toy_manifest() {
  static const Manifest m = [] {
    const auto dir = scratch_dir("train_toy");
    Config c;
    c.set("pairs", "8");
    c.set("seed", "5");
    c.set("width", "32");
    c.set("height", "48");
    c.set("focal", "62.5");
    generate_dataset(DatasetConfig::from_config(c), dir.string());
    return load_manifest((dir / "manifest.tsv").string());
  }();
  return m;
}

TrainConfig toy_config(int steps) {
  Config c;
  c.set("steps", std::to_string(steps));
  c.set("seed", "3");
  c.set("lr", "1e-3");
  return TrainConfig::from_config(c);
}

}  // namespace

TEST_CASE("training with zero steps returns the initialization") {
  const TrainReport r = train(toy_manifest(), nullptr, toy_config(0));
  const UNetParams init = initial_params(toy_config(0));
  REQUIRE(r.params.names == init.names);
  for (size_t i = 0; i < init.tensors.size(); ++i) CHECK(r.params.tensors[i].data == init.tensors[i].data);
  CHECK(r.losses.empty());
}

TEST_CASE("training is deterministic and logs finite losses") {
  std::ostringstream log1, log2;
  const TrainReport a = train(toy_manifest(), &toy_manifest(), toy_config(6), &log1);
  const TrainReport b = train(toy_manifest(), &toy_manifest(), toy_config(6), &log2);
  CHECK(log1.str() == log2.str());
  for (size_t i = 0; i < a.params.tensors.size(); ++i) CHECK(a.params.tensors[i].data == b.params.tensors[i].data);
  std::istringstream in(log1.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "step\tloss\tval_aepe");
  int expect = 0;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    CHECK(std::stoi(line.substr(0, tab)) == expect++);
    const std::string loss = line.substr(tab + 1, line.find('\t', tab + 1) - tab - 1);
    if (loss != "-") CHECK(std::isfinite(std::stod(loss)));
  }
  CHECK(expect == 7);  // six steps and the final validation row

  Config c;
  c.set("steps", "6");
  c.set("seed", "3");
  c.set("lr", "1e-3");
  c.set("loss", "triplet");
  const TrainReport t = train(toy_manifest(), nullptr, TrainConfig::from_config(c));
  CHECK(t.params.tensors[0].data != a.params.tensors[0].data);
}

TEST_CASE("training loss decreases over 200 steps") {
  const TrainReport r = train(toy_manifest(), nullptr, toy_config(200));
  REQUIRE(r.losses.size() == 200);
  const double first = std::accumulate(r.losses.begin(), r.losses.begin() + 50, 0.0) / 50;
  const double last = std::accumulate(r.losses.end() - 50, r.losses.end(), 0.0) / 50;
  MESSAGE("smoothed loss " << first << " -> " << last);
  CHECK(last < first);
}

TEST_CASE("training config validation") {
  Config c;
  c.set("batch", "0");
  CHECK_THROWS_AS(TrainConfig::from_config(c), Error);
  Config d;
  d.set("loss", "nope");
  CHECK_THROWS_AS(TrainConfig::from_config(d), Error);
  const TrainConfig t = TrainConfig::from_config(Config());
  const Config resolved = t.to_config();
  CHECK(resolved.get_string("loss", "") == "full");
  CHECK(resolved.get_string("plan", "") == "16,32,64");
  CHECK(TrainConfig::from_config(resolved).to_config().dump() == resolved.dump());
}
