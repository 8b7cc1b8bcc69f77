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

#include "geofeat/train.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <ostream>
#include <sstream>

#include "geofeat/error.hpp"

namespace geofeat {

LossSelection LossSelection::parse(const std::string& spec) {
  LossSelection s;
  if (spec == "full") {
    s.c = s.s = s.d = s.cd = true;
    return s;
  }
  if (spec == "triplet") {
    s.t = true;
    return s;
  }
  std::stringstream in(spec);
  std::string tok;
  while (std::getline(in, tok, '+')) {
    if (tok == "c") s.c = true;
    else if (tok == "s") s.s = true;
    else if (tok == "d") s.d = true;
    else if (tok == "cd") s.cd = true;
    else if (tok == "t" || tok == "triplet") s.t = true;
    else throw_usage("unknown loss term '" + tok + "' in '" + spec + "'");
  }
  if (!s.any()) throw_usage("loss selection '" + spec + "' is empty");
  return s;
}

std::string LossSelection::str() const {
  if (c && s && d && cd && !t) return "full";
  if (t && !c && !s && !d && !cd) return "triplet";
  std::string out;
  auto put = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += "+";
    out += name;
  };
  put(c, "c");
  put(s, "s");
  put(d, "d");
  put(cd, "cd");
  put(t, "t");
  return out;
}

double total_loss_value(const std::vector<std::array<double, 5>>& levels, const LossWeights& w) {
  if (levels.empty()) throw_usage("total loss needs the finest level");
  double total = 0;
  for (size_t i = 0; i < levels.size(); ++i) {
    const double f = i + 1 == levels.size() ? 1.0 : w.intermediate;
    const auto& l = levels[i];
    total += f * (w.c * l[0] + w.s * l[1] + w.d * l[2] + w.cd * l[3] + w.t * l[4]);
  }
  return total;
}

namespace {

std::string plan_string(const std::vector<int>& plan) {
  std::string s;
  for (size_t i = 0; i < plan.size(); ++i) s += (i ? "," : "") + std::to_string(plan[i]);
  return s;
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

TrainConfig TrainConfig::from_config(const Config& c) {
  TrainConfig t;
  t.seed = static_cast<std::uint64_t>(c.get_int("seed", 0));
  t.steps = static_cast<int>(c.get_int("steps", t.steps));
  t.batch = static_cast<int>(c.get_int("batch", t.batch));
  t.lr = c.get_double("lr", t.lr);
  t.lr_decay = c.get_double("lr_decay", t.lr_decay);
  t.lr_decay_every = static_cast<int>(c.get_int("lr_decay_every", t.lr_decay_every));
  t.loss = LossSelection::parse(c.get_string("loss", "full"));
  t.weights.c = c.get_double("w_c", t.weights.c);
  t.weights.s = c.get_double("w_s", t.weights.s);
  t.weights.d = c.get_double("w_d", t.weights.d);
  t.weights.cd = c.get_double("w_cd", t.weights.cd);
  t.weights.t = c.get_double("w_t", t.weights.t);
  t.weights.intermediate = c.get_double("w_intermediate", t.weights.intermediate);
  t.triplets = static_cast<int>(c.get_int("triplets", t.triplets));
  t.dense_refs = static_cast<int>(c.get_int("dense_refs", t.dense_refs));
  t.cross_refs = static_cast<int>(c.get_int("cross_refs", t.cross_refs));
  t.margin = c.get_double("margin", t.margin);
  t.neg_radius = c.get_double("neg_radius", t.neg_radius);
  t.plan = c.get_int_list("plan", t.plan);
  t.feature_dim = static_cast<int>(c.get_int("feature_dim", t.feature_dim));
  t.val_every = static_cast<int>(c.get_int("val_every", t.val_every));
  t.val_pairs = static_cast<int>(c.get_int("val_pairs", t.val_pairs));
  if (t.steps < 0) throw_usage("steps must be nonnegative");
  if (t.batch < 1) throw_usage("batch must be positive");
  if (!(t.lr > 0)) throw_usage("lr must be positive");
  if (!(t.lr_decay > 0 && t.lr_decay <= 1)) throw_usage("lr_decay must lie in (0, 1]");
  if (t.triplets < 1 || t.dense_refs < 1 || t.cross_refs < 1)
    throw_usage("sampling counts must be positive");
  if (t.margin < 0 || t.neg_radius < 0) throw_usage("margin and neg_radius must be nonnegative");
  for (double w : {t.weights.c, t.weights.s, t.weights.d, t.weights.cd, t.weights.t,
                   t.weights.intermediate})
    if (!(w >= 0)) throw_usage("loss weights must be nonnegative");
  if (t.feature_dim < 1) throw_usage("feature_dim must be positive");
  if (t.val_pairs < 0) throw_usage("val_pairs must be nonnegative");
  return t;
}

Config TrainConfig::to_config() const {
  Config c;
  c.set("seed", std::to_string(seed));
  c.set("steps", std::to_string(steps));
  c.set("batch", std::to_string(batch));
  c.set("lr", num(lr));
  c.set("lr_decay", num(lr_decay));
  c.set("lr_decay_every", std::to_string(decay_every()));
  c.set("loss", loss.str());
  c.set("w_c", num(weights.c));
  c.set("w_s", num(weights.s));
  c.set("w_d", num(weights.d));
  c.set("w_cd", num(weights.cd));
  c.set("w_t", num(weights.t));
  c.set("w_intermediate", num(weights.intermediate));
  c.set("triplets", std::to_string(triplets));
  c.set("dense_refs", std::to_string(dense_refs));
  c.set("cross_refs", std::to_string(cross_refs));
  c.set("margin", num(margin));
  c.set("neg_radius", num(neg_radius));
  c.set("plan", plan_string(plan));
  c.set("feature_dim", std::to_string(feature_dim));
  c.set("val_every", std::to_string(validation_every()));
  c.set("val_pairs", std::to_string(val_pairs));
  return c;
}

UNetParams initial_params(const TrainConfig& cfg) {
  Rng rng(cfg.seed, "train/init");
  return init_params(rng, cfg.plan, cfg.feature_dim);
}

Tensor<float> network_input(const FloatImage& rgb) {
  if (rgb.channels != 3) throw_usage("network input must have 3 channels");
  Tensor<float> t({rgb.height, rgb.width, 3});
  for (size_t i = 0; i < rgb.data.size(); ++i) t.data[i] = rgb.data[i] - 0.5f;
  return t;
}

FeatureMap extract_features(const UNetParams& params, const FloatImage& rgb) {
  return unet_extract(params, network_input(rgb)).back();
}

namespace {

// Foreground pixels of one view at one resolution level. A coarse pixel
// takes the rasters of its nearest fine pixel (nearest-neighbor
// downsampling).
struct LevelPixels {
  int scale = 1, w = 0, h = 0;
  std::vector<int> fg;    // coarse row-major indices on the foreground
  std::vector<int> fine;  // fine index per entry of fg
};

struct ViewLevels {
  std::vector<LevelPixels> levels;  // fine to coarse, scale 1, 2, 4, ...
};

LevelPixels make_level(const ByteImage& fg, int scale) {
  LevelPixels l;
  l.scale = scale;
  l.w = fg.width / scale;
  l.h = fg.height / scale;
  for (int y = 0; y < l.h; ++y)
    for (int x = 0; x < l.w; ++x) {
      const int fx = x * scale + scale / 2, fy = y * scale + scale / 2;
      if (!fg.at(fx, fy)) continue;
      l.fg.push_back(y * l.w + x);
      l.fine.push_back(fy * fg.width + fx);
    }
  return l;
}

struct TrainPair {
  PairData data;
  ViewLevels levels[2];
};

const CorrespondenceField& corr_from(const TrainPair& p, int v) {
  return v == 0 ? p.data.c12 : p.data.c21;
}
const std::vector<FloatImage>& geo_on(const TrainPair& p, int v) {
  return v == 0 ? p.data.geo1 : p.data.geo2;
}
const ViewData& view_of(const TrainPair& p, int v) {
  return v == 0 ? p.data.view1 : p.data.view2;
}

// Fine pixel coordinates to continuous coordinates at a coarser level.
double to_level(double fine, int scale) { return (fine + 0.5) / scale - 0.5; }

struct Sampler {
  const TrainConfig& cfg;
  double g_scale;
  Rng rng;
  long ties = 0;

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<size_t>(rng.below(v.size()))];
  }

  LevelTerms level_terms(Graph<float>& g, Var fmap, const std::vector<const TrainPair*>& batch,
                         int level) {
    LevelTerms terms;
    const LossSelection& sel = cfg.loss;
    const int images = static_cast<int>(batch.size()) * 2;

    if (sel.c || sel.t) {
      std::vector<MapPoint> p1, p2, neg;
      for (size_t b = 0; b < batch.size(); ++b)
        for (int v = 0; v < 2; ++v) {
          const TrainPair& pair = *batch[b];
          const LevelPixels& lp = pair.levels[v].levels[static_cast<size_t>(level)];
          const LevelPixels& lo = pair.levels[1 - v].levels[static_cast<size_t>(level)];
          const CorrespondenceField& corr = corr_from(pair, v);
          const int fw = corr.width();
          const int n = static_cast<int>(b) * 2 + v, m = static_cast<int>(b) * 2 + 1 - v;
          for (size_t k = 0; k < lp.fg.size(); ++k) {
            const int f = lp.fine[k];
            if (!corr.visible.data[static_cast<size_t>(f)]) continue;
            const double tx = corr.target.data[static_cast<size_t>(f) * 2];
            const double ty = corr.target.data[static_cast<size_t>(f) * 2 + 1];
            MapPoint q{-1, 0, 0};
            if (sel.t) {
              for (int attempt = 0; attempt < 32; ++attempt) {
                const size_t j = static_cast<size_t>(rng.below(lo.fg.size()));
                const int nf = lo.fine[j];
                if (std::hypot(nf % fw - tx, nf / fw - ty) > cfg.neg_radius) {
                  q = {m, double(lo.fg[j] % lo.w), double(lo.fg[j] / lo.w)};
                  break;
                }
              }
              if (q.n < 0) continue;
            }
            p1.push_back({n, double(lp.fg[k] % lp.w), double(lp.fg[k] / lp.w)});
            p2.push_back({m, to_level(tx, lp.scale), to_level(ty, lp.scale)});
            if (sel.t) neg.push_back(q);
          }
        }
      if (sel.c) terms.c = loss_consistency(g, fmap, fmap, p1, p2);
      if (sel.t) terms.t = loss_triplet(g, fmap, fmap, p1, p2, neg, cfg.margin);
    }

    if (sel.s) {
      std::vector<OrdinalTriplet> trip;
      const int per_image = std::max(1, cfg.triplets / images);
      for (size_t b = 0; b < batch.size(); ++b)
        for (int v = 0; v < 2; ++v) {
          const TrainPair& pair = *batch[b];
          const LevelPixels& lp = pair.levels[v].levels[static_cast<size_t>(level)];
          const auto refs = sources_of(pair, v, false);
          const auto& geo = geo_on(pair, v);
          const int n = static_cast<int>(b) * 2 + v;
          for (int i = 0; i < per_image; ++i) {
            const int j = pick(refs);
            const SourcePixel& src = pair.data.sources[static_cast<size_t>(j)];
            const size_t a = static_cast<size_t>(rng.below(lp.fg.size()));
            const size_t c = static_cast<size_t>(rng.below(lp.fg.size()));
            const float ga = geo[static_cast<size_t>(j)].data[static_cast<size_t>(lp.fine[a])];
            const float gc = geo[static_cast<size_t>(j)].data[static_cast<size_t>(lp.fine[c])];
            if (std::isnan(ga) || std::isnan(gc)) continue;
            trip.push_back({{n, to_level(src.x, lp.scale), to_level(src.y, lp.scale)},
                            {n, double(lp.fg[a] % lp.w), double(lp.fg[a] / lp.w)},
                            {n, double(lp.fg[c] % lp.w), double(lp.fg[c] / lp.w)},
                            ga,
                            gc});
          }
        }
      int skipped = 0;
      terms.s = loss_sparse_ordinal(g, fmap, trip, &skipped);
      ties += skipped;
    }

    if (sel.d) {
      std::vector<Var> parts;
      for (size_t b = 0; b < batch.size(); ++b)
        for (int v = 0; v < 2; ++v)
          for (int r = 0; r < cfg.dense_refs; ++r) {
            const TrainPair& pair = *batch[b];
            const int j = pick(sources_of(pair, v, false));
            const int n = static_cast<int>(b) * 2 + v;
            parts.push_back(geodesic_term(g, fmap, pair, j, v, n, v, n, level));
          }
      terms.d = average(g, parts);
    }

    if (sel.cd) {
      std::vector<Var> parts;
      for (size_t b = 0; b < batch.size(); ++b)
        for (int r = 0; r < cfg.cross_refs; ++r) {
          const TrainPair& pair = *batch[b];
          int v = static_cast<int>(rng.below(2));
          if (sources_of(pair, v, true).empty()) v = 1 - v;
          const auto refs = sources_of(pair, v, true);
          if (refs.empty()) continue;
          const int j = pick(refs);
          const int n = static_cast<int>(b) * 2 + v, m = static_cast<int>(b) * 2 + 1 - v;
          parts.push_back(geodesic_term(g, fmap, pair, j, v, n, 1 - v, m, level));
        }
      if (!parts.empty()) terms.cd = average(g, parts);
    }
    return terms;
  }

  static std::vector<int> sources_of(const TrainPair& p, int v, bool visible_only) {
    std::vector<int> out;
    for (size_t j = 0; j < p.data.sources.size(); ++j) {
      const SourcePixel& s = p.data.sources[j];
      if (s.view == v + 1 && (!visible_only || s.visible)) out.push_back(static_cast<int>(j));
    }
    return out;
  }

  // Geodesic softplus term from source j (in view sv, batch image sn) to all
  // foreground pixels of view tv (batch image tn).
  Var geodesic_term(Graph<float>& g, Var fmap, const TrainPair& pair, int j, int sv, int sn,
                    int tv, int tn, int level) {
    const SourcePixel& src = pair.data.sources[static_cast<size_t>(j)];
    const LevelPixels& ls = pair.levels[sv].levels[static_cast<size_t>(level)];
    const LevelPixels& lt = pair.levels[tv].levels[static_cast<size_t>(level)];
    const FloatImage& geo = geo_on(pair, tv)[static_cast<size_t>(j)];
    std::vector<MapPoint> targets;
    std::vector<double> ghat;
    for (size_t k = 0; k < lt.fg.size(); ++k) {
      const float gv = geo.data[static_cast<size_t>(lt.fine[k])];
      if (std::isnan(gv)) continue;
      targets.push_back({tn, double(lt.fg[k] % lt.w), double(lt.fg[k] / lt.w)});
      ghat.push_back(normalize_geodesic(gv, g_scale));
    }
    const MapPoint ref{sn, to_level(src.x, ls.scale), to_level(src.y, ls.scale)};
    return loss_cross_view(g, fmap, fmap, ref, targets, ghat);
  }

  static Var average(Graph<float>& g, const std::vector<Var>& parts) {
    Var sum = parts.front();
    for (size_t i = 1; i < parts.size(); ++i) sum = add(g, sum, parts[i]);
    return affine(g, sum, 1.0f / static_cast<float>(parts.size()));
  }
};

double validation_aepe(const UNetParams& params, const std::vector<PairData>& val) {
  double sum = 0;
  for (const PairData& p : val) {
    const FeatureMap f1 = extract_features(params, p.view1.rgb);
    const FeatureMap f2 = extract_features(params, p.view2.rgb);
    const MatchResult m = nn_match(f1, f2, p.view1.foreground, p.view2.foreground);
    sum += aepe(m.corr, p.c12, AepeMode::kNonOccluded);
  }
  return sum / static_cast<double>(val.size());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Every step allocates and frees the same set of large activation buffers.
// Keeping freed blocks in the heap avoids paying fresh page faults for them
// on each step, which otherwise costs about as much as the arithmetic.
void keep_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace

TrainReport train(const Manifest& train_set, const Manifest* val_set, const TrainConfig& cfg,
                  std::ostream* log) {
  keep_freed_memory();
  TrainReport report;
  report.params = initial_params(cfg);
  if (train_set.size() == 0 && cfg.steps > 0) throw_data("training set is empty");
  const double g_scale = train_set.meta_double("g_scale");
  if (!(g_scale > 0)) throw_data("manifest g_scale must be positive");

  std::vector<TrainPair> pairs(train_set.size());
  if (cfg.steps > 0) {
    for (size_t i = 0; i < train_set.size(); ++i) {
      pairs[i].data = load_pair(train_set, i);
      check_input_size(report.params, pairs[i].data.view1.rgb.height,
                       pairs[i].data.view1.rgb.width);
      for (int v = 0; v < 2; ++v)
        for (int l = 0; l < report.params.levels(); ++l) {
          const LevelPixels lp = make_level(view_of(pairs[i], v).foreground, 1 << l);
          if (lp.fg.empty()) throw_data("pair " + pairs[i].data.id + " has an empty level");
          pairs[i].levels[v].levels.push_back(lp);
        }
    }
  }
  std::vector<PairData> val;
  if (val_set)
    for (size_t i = 0; i < val_set->size() && static_cast<int>(i) < cfg.val_pairs; ++i)
      val.push_back(load_pair(*val_set, i));

  if (log) *log << "step\tloss\tval_aepe\n";
  AdamState adam;
  Sampler sampler{cfg, g_scale, Rng(cfg.seed, "train/sample")};
  Rng order_rng(cfg.seed, "train/order");
  std::vector<size_t> order;
  size_t cursor = 0;
  const int levels = report.params.levels();

  auto validate = [&](int step) -> std::string {
    if (val.empty()) return "-";
    const double a = validation_aepe(report.params, val);
    report.val_aepe.emplace_back(step, a);
    return fmt(a);
  };

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<const TrainPair*> batch;
    for (int b = 0; b < cfg.batch; ++b) {
      if (cursor == order.size()) {
        order.resize(pairs.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1], order[static_cast<size_t>(order_rng.below(i))]);
        cursor = 0;
      }
      batch.push_back(&pairs[order[cursor++]]);
    }
    const int h = batch[0]->data.view1.rgb.height, w = batch[0]->data.view1.rgb.width;
    Tensor<float> input({2 * cfg.batch, h, w, 3});
    for (size_t b = 0; b < batch.size(); ++b)
      for (int v = 0; v < 2; ++v) {
        const FloatImage& rgb = view_of(*batch[b], v).rgb;
        if (rgb.width != w || rgb.height != h) throw_data("training images differ in size");
        const size_t off = (b * 2 + static_cast<size_t>(v)) * rgb.data.size();
        for (size_t i = 0; i < rgb.data.size(); ++i) input.data[off + i] = rgb.data[i] - 0.5f;
      }

    Graph<float> g;
    const auto vars = add_params(g, report.params);
    const auto maps = unet_forward(g, report.params, vars, g.constant(std::move(input)));
    std::vector<LevelTerms> terms;
    for (int i = 0; i < levels; ++i)
      terms.push_back(sampler.level_terms(g, maps[static_cast<size_t>(i)], batch, levels - 1 - i));
    const Var loss = total_loss(g, terms, cfg.weights);
    const double value = g.value(loss)[0];
    if (!std::isfinite(value)) throw_numeric("loss diverged at step " + std::to_string(step));
    const std::string val_col = step % cfg.validation_every() == 0 ? validate(step) : "-";
    g.backward(loss);
    std::vector<Tensor<float>> grads;
    for (Var v : vars) grads.push_back(g.grad(v));
    AdamConfig ac;
    ac.lr = static_cast<float>(cfg.lr * std::pow(cfg.lr_decay, step / cfg.decay_every()));
    adam_step(report.params.tensors, grads, adam, ac);
    report.losses.push_back(value);
    if (log) *log << step << "\t" << fmt(value) << "\t" << val_col << "\n" << std::flush;
  }
  if (log && !val.empty()) *log << cfg.steps << "\t-\t" << validate(cfg.steps) << "\n";
  report.skipped_ties = sampler.ties;
  return report;
}

std::string EvalTable::tsv() const {
  auto f = [](double v) {
    if (std::isnan(v)) return std::string("nan");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  std::string out =
      "id\taepe_non\taepe_all\tocc_ap\tdnn_occluded\tdnn_visible\tcycle_cascade\tcycle_direct\n";
  auto row = [&](const EvalRow& r) {
    out += r.id + "\t" + f(r.aepe_non) + "\t" + f(r.aepe_all) + "\t" + f(r.occlusion_ap) + "\t" +
           f(r.dnn_occluded) + "\t" + f(r.dnn_visible) + "\t" + f(r.cycle_cascade) + "\t" +
           f(r.cycle_direct) + "\n";
  };
  for (const EvalRow& r : rows) row(r);
  row(mean);
  return out;
}

EvalTable evaluate(const UNetParams* params, const Manifest& manifest, bool gt_oracle,
                   size_t max_pairs) {
  if (!params && !gt_oracle) throw_usage("evaluate needs a model or the ground-truth oracle");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const bool triples = manifest.has_column("flow13");
  const size_t n = max_pairs ? std::min(max_pairs, manifest.size()) : manifest.size();
  EvalTable table;
  for (size_t i = 0; i < n; ++i) {
    const PairData p = load_pair(manifest, i);
    EvalRow row;
    row.id = p.id;
    MatchResult m;
    FeatureMap f1;
    if (gt_oracle) {
      m.corr = p.c12;
      m.d_nn = FloatImage(p.c12.width(), p.c12.height(), 1, std::numeric_limits<float>::quiet_NaN());
      for (int y = 0; y < m.d_nn.height; ++y)
        for (int x = 0; x < m.d_nn.width; ++x)
          if (p.c12.valid.at(x, y)) m.d_nn.at(x, y) = p.c12.visible.at(x, y) ? 0.0f : 1.0f;
    } else {
      f1 = extract_features(*params, p.view1.rgb);
      const FeatureMap f2 = extract_features(*params, p.view2.rgb);
      m = nn_match(f1, f2, p.view1.foreground, p.view2.foreground);
    }
    row.aepe_non = aepe(m.corr, p.c12, AepeMode::kNonOccluded);
    row.aepe_all = aepe(m.corr, p.c12, AepeMode::kAll);
    ByteImage occluded(p.c12.width(), p.c12.height(), 1, 0);
    double so = 0, sv = 0;
    size_t no = 0, nv = 0;
    for (int y = 0; y < occluded.height; ++y)
      for (int x = 0; x < occluded.width; ++x) {
        if (!p.c12.valid.at(x, y)) continue;
        const bool occ = !p.c12.visible.at(x, y);
        occluded.at(x, y) = occ ? 1 : 0;
        (occ ? so : sv) += m.d_nn.at(x, y);
        ++(occ ? no : nv);
      }
    row.dnn_occluded = no ? so / double(no) : nan;
    row.dnn_visible = nv ? sv / double(nv) : nan;
    row.occlusion_ap =
        no && nv ? occlusion_ap(visibility_map(m), occluded, p.c12.valid) : nan;
    row.cycle_cascade = row.cycle_direct = nan;
    if (triples) {
      const TripleData t = load_triple(manifest, i);
      if (gt_oracle) {
        row.cycle_cascade = row.cycle_direct = aepe(t.c13, t.c13, AepeMode::kNonOccluded);
      } else {
        const FeatureMap f2 = extract_features(*params, t.view2.rgb);
        const FeatureMap f3 = extract_features(*params, t.view3.rgb);
        const CycleError e = cycle_error(f1, f2, f3, t.view1.foreground, t.view2.foreground,
                                         t.view3.foreground, t.c13);
        row.cycle_cascade = e.cascade;
        row.cycle_direct = e.direct;
      }
    }
    table.rows.push_back(row);
  }
  table.mean.id = "mean";
  auto avg = [&](double EvalRow::*field) {
    double s = 0;
    size_t k = 0;
    for (const EvalRow& r : table.rows)
      if (!std::isnan(r.*field)) {
        s += r.*field;
        ++k;
      }
    table.mean.*field = k ? s / double(k) : nan;
  };
  for (auto f : {&EvalRow::aepe_non, &EvalRow::aepe_all, &EvalRow::occlusion_ap,
                 &EvalRow::dnn_occluded, &EvalRow::dnn_visible, &EvalRow::cycle_cascade,
                 &EvalRow::cycle_direct})
    avg(f);
  return table;
}

}  // namespace geofeat
