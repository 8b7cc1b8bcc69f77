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

#include "geofeat/geofeat.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "geofeat/config.hpp"
#include "geofeat/dataset.hpp"
#include "geofeat/error.hpp"
#include "geofeat/geodesic.hpp"
#include "geofeat/image_io.hpp"
#include "geofeat/matchkit.hpp"
#include "geofeat/mesh.hpp"
#include "geofeat/train.hpp"
#include "geofeat/unet.hpp"

struct gf_config {
  geofeat::Config config;
};

struct gf_model {
  geofeat::UNetParams params;
};

namespace {

using namespace geofeat;
namespace fs = std::filesystem;

thread_local std::string g_last_error;

template <typename F>
gf_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return GF_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    switch (e.kind()) {
      case ErrorKind::kUsage: return GF_ERR_USAGE;
      case ErrorKind::kData: return GF_ERR_DATA;
      case ErrorKind::kIo: return GF_ERR_IO;
      case ErrorKind::kNumeric: return GF_ERR_NUMERIC;
      default: return GF_ERR_INTERNAL;
    }
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return GF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GF_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw_usage(std::string(what) + " must not be null");
}

void emit(gf_log_fn log, void* user, const std::string& line) {
  if (log) log(line.c_str(), user);
}

void emit_config(gf_log_fn log, void* user, const Config& c) {
  std::istringstream in(c.dump());
  for (std::string line; std::getline(in, line);) emit(log, user, line);
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Forwards complete lines to a callback and an optional file.
class LineTee : public std::streambuf {
 public:
  LineTee(gf_log_fn log, void* user, std::ostream* file) : log_(log), user_(user), file_(file) {}
  ~LineTee() override {
    if (!line_.empty()) flush_line();
  }

 protected:
  int overflow(int ch) override {
    if (ch == traits_type::eof()) return 0;
    if (ch == '\n')
      flush_line();
    else
      line_.push_back(static_cast<char>(ch));
    return ch;
  }

 private:
  void flush_line() {
    if (file_) *file_ << line_ << '\n' << std::flush;
    emit(log_, user_, line_);
    line_.clear();
  }

  gf_log_fn log_;
  void* user_;
  std::ostream* file_;
  std::string line_;
};

FloatImage load_rgb(const std::string& path) {
  const ByteImage b = read_png(path);
  if (b.channels != 3) throw_data(path + ": expected an RGB image");
  return to_floats(b);
}

// PNG: nonzero is foreground. PFM: face index >= 0 is foreground.
ByteImage load_foreground(const std::string& path) {
  if (fs::path(path).extension() == ".pfm") {
    const FloatImage face = read_pfm(path);
    ByteImage fg(face.width, face.height, 1);
    for (size_t i = 0; i < fg.data.size(); ++i) fg.data[i] = face.data[i * face.channels] >= 0;
    return fg;
  }
  ByteImage m = read_png(path);
  ByteImage fg(m.width, m.height, 1);
  for (size_t i = 0; i < fg.data.size(); ++i) fg.data[i] = m.data[i * m.channels] != 0;
  return fg;
}

ByteImage foreground_or_all(const Config& c, const char* key, int w, int h) {
  if (!c.has(key)) return ByteImage(w, h, 1, 1);
  ByteImage fg = load_foreground(c.require_string(key));
  if (fg.width != w || fg.height != h)
    throw_data(std::string(key) + " does not match the image size");
  return fg;
}

void check_model_size(const UNetParams& params, const FloatImage& img, const std::string& name) {
  const int f = 1 << (params.levels() - 1);
  if (img.width % f || img.height % f)
    throw_data(name + " is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
               "; the checkpoint needs sides divisible by " + std::to_string(f));
}

MatchResult match_images(const UNetParams& params, const FloatImage& i1, const FloatImage& i2,
                         const ByteImage& fg1, const ByteImage& fg2) {
  check_model_size(params, i1, "image1");
  check_model_size(params, i2, "image2");
  return nn_match(extract_features(params, i1), extract_features(params, i2), fg1, fg2);
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw_io("cannot create " + parent.string() + ": " + ec.message());
}

std::pair<int, int> parse_probe(const std::string& s) {
  int x = 0, y = 0;
  char comma = 0, extra = 0;
  std::istringstream in(s);
  if (!(in >> x >> comma >> y) || comma != ',' || (in >> extra))
    throw_usage("probe must be x,y, got '" + s + "'");
  return {x, y};
}

// Gray levels fall with distance (0 -> white, 2 -> black); background is
// black and the argmin pixel red.
ByteImage render_heatmap(const FloatImage& h) {
  ByteImage out(h.width, h.height, 3, 0);
  int best = -1;
  float bd = std::numeric_limits<float>::infinity();
  for (size_t i = 0; i < h.data.size(); ++i) {
    const float d = h.data[i];
    if (std::isnan(d)) continue;
    if (d < bd) {
      bd = d;
      best = static_cast<int>(i);
    }
    const float v = std::clamp(1.0f - d / 2.0f, 0.0f, 1.0f);
    const auto b = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = b;
  }
  if (best >= 0) {
    out.data[best * 3] = 255;
    out.data[best * 3 + 1] = 0;
    out.data[best * 3 + 2] = 0;
  }
  return out;
}

CorrespondenceField field_from_flo(const std::string& path) {
  const FloatImage flow = read_flo(path);
  ByteImage known(flow.width, flow.height, 1, 0);
  for (size_t i = 0; i < known.data.size(); ++i) {
    const float dx = flow.data[2 * i], dy = flow.data[2 * i + 1];
    known.data[i] = std::isfinite(dx) && std::isfinite(dy) && std::fabs(dx) < 1e9f &&
                    std::fabs(dy) < 1e9f;
  }
  return flow_to_correspondence(flow, known);
}

std::string frame_path(const std::string& out, int i) {
  const fs::path p(out);
  char idx[16];
  std::snprintf(idx, sizeof idx, "_%03d", i);
  return (p.parent_path() / (p.stem().string() + idx + p.extension().string())).string();
}

SurfacePoint parse_source(const TriangleMesh& mesh, const std::string& spec) {
  if (spec.rfind("v:", 0) == 0) {
    std::size_t used = 0;
    int v = -1;
    try {
      v = std::stoi(spec.substr(2), &used);
    } catch (const std::exception&) {
      throw_usage("bad vertex source '" + spec + "'");
    }
    if (used != spec.size() - 2) throw_usage("bad vertex source '" + spec + "'");
    if (v < 0 || v >= static_cast<int>(mesh.vertices.size()))
      throw_data("source vertex " + std::to_string(v) + " out of range");
    return vertex_surface_point(mesh, v);
  }
  if (spec.rfind("f:", 0) == 0) {
    SurfacePoint sp;
    double b1 = 0, b2 = 0;
    char c1 = 0, c2 = 0, extra = 0;
    std::istringstream in(spec.substr(2));
    if (!(in >> sp.face >> c1 >> b1 >> c2 >> b2) || c1 != ':' || c2 != ',' || (in >> extra))
      throw_usage("face source must be f:<face>:<b1>,<b2>, got '" + spec + "'");
    sp.bary = {1.0 - b1 - b2, b1, b2};
    check_surface_point(mesh, sp);
    return sp;
  }
  throw_usage("source must be v:<index> or f:<face>:<b1>,<b2>, got '" + spec + "'");
}

std::string num17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

extern "C" {

const char* gf_last_error(void) { return g_last_error.c_str(); }

const char* gf_version(void) { return "0.1.0"; }

void gf_string_free(char* s) { std::free(s); }

gf_status gf_config_new(gf_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new gf_config;
  });
}

gf_status gf_config_load(gf_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    config->config.merge(Config::from_file(path));
  });
}

gf_status gf_config_set(gf_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->config.set(key, value);
  });
}

gf_status gf_config_set_assignment(gf_config* config, const char* assignment) {
  return guarded([&] {
    require(config, "config");
    require(assignment, "assignment");
    config->config.set_assignment(assignment);
  });
}

gf_status gf_config_dump(const gf_config* config, char** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = copy_string(config->config.dump());
  });
}

void gf_config_free(gf_config* config) { delete config; }

gf_status gf_model_load(const char* checkpoint, gf_model** out) {
  return guarded([&] {
    require(checkpoint, "checkpoint");
    require(out, "out");
    auto m = std::make_unique<gf_model>();
    m->params = load_params(checkpoint);
    *out = m.release();
  });
}

gf_status gf_model_init(const gf_config* config, gf_model** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    auto m = std::make_unique<gf_model>();
    m->params = initial_params(TrainConfig::from_config(config->config));
    *out = m.release();
  });
}

gf_status gf_model_save(const gf_model* model, const char* checkpoint) {
  return guarded([&] {
    require(model, "model");
    require(checkpoint, "checkpoint");
    save_params(checkpoint, model->params);
  });
}

int gf_model_feature_dim(const gf_model* model) { return model ? model->params.feature_dim : 0; }

gf_status gf_model_extract(const gf_model* model, const float* rgb, int width, int height,
                           float* out, size_t out_len) {
  return guarded([&] {
    require(model, "model");
    require(rgb, "rgb");
    require(out, "out");
    if (width <= 0 || height <= 0) throw_usage("image size must be positive");
    const size_t n = static_cast<size_t>(width) * height;
    if (out_len < n * model->params.feature_dim) throw_usage("output buffer too small");
    FloatImage img(width, height, 3);
    std::copy(rgb, rgb + n * 3, img.data.begin());
    check_model_size(model->params, img, "image");
    const FeatureMap f = extract_features(model->params, img);
    std::copy(f.data.begin(), f.data.end(), out);
  });
}

void gf_model_free(gf_model* model) { delete model; }

gf_status gf_run_gen_data(const gf_config* config, const char* out_dir, gf_log_fn log,
                          void* user) {
  return guarded([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    const DatasetConfig d = DatasetConfig::from_config(config->config);
    Config resolved = d.to_config();
    resolved.set("out", out_dir);
    emit_config(log, user, resolved);
    const std::string manifest = generate_dataset(d, out_dir);
    emit(log, user, "manifest = " + manifest);
  });
}

gf_status gf_run_train(const gf_config* config, const char* train_manifest,
                       const char* val_manifest, const char* checkpoint_out,
                       const char* log_path, gf_log_fn log, void* user) {
  return guarded([&] {
    require(config, "config");
    require(train_manifest, "train_manifest");
    require(checkpoint_out, "checkpoint_out");
    const TrainConfig tc = TrainConfig::from_config(config->config);
    Config resolved = tc.to_config();
    resolved.set("train", train_manifest);
    if (val_manifest) resolved.set("val", val_manifest);
    resolved.set("out", checkpoint_out);
    if (log_path) resolved.set("log", log_path);
    emit_config(log, user, resolved);

    const Manifest train_set = load_manifest(train_manifest);
    std::optional<Manifest> val_set;
    if (val_manifest) val_set = load_manifest(val_manifest);
    std::ofstream file;
    if (log_path) {
      ensure_parent(log_path);
      file.open(log_path, std::ios::binary);
      if (!file) throw_io(std::string("cannot write ") + log_path);
    }
    LineTee tee(log, user, log_path ? &file : nullptr);
    std::ostream out(&tee);
    const TrainReport report = train(train_set, val_set ? &*val_set : nullptr, tc, &out);
    out.flush();
    ensure_parent(checkpoint_out);
    save_params(checkpoint_out, report.params);
  });
}

gf_status gf_run_match(const gf_config* config, const char* checkpoint, const char* image1,
                       const char* image2, const char* out_prefix, gf_log_fn log, void* user) {
  return guarded([&] {
    require(config, "config");
    require(checkpoint, "checkpoint");
    require(image1, "image1");
    require(image2, "image2");
    require(out_prefix, "out_prefix");
    const Config& c = config->config;
    Config resolved;
    resolved.set("checkpoint", checkpoint);
    resolved.set("image1", image1);
    resolved.set("image2", image2);
    resolved.set("out", out_prefix);
    for (const char* key : {"fg1", "fg2", "probe"})
      if (c.has(key)) resolved.set(key, c.require_string(key));
    emit_config(log, user, resolved);

    std::optional<std::pair<int, int>> probe;
    if (c.has("probe")) probe = parse_probe(c.require_string("probe"));
    const UNetParams params = load_params(checkpoint);
    const FloatImage i1 = load_rgb(image1), i2 = load_rgb(image2);
    if (!i1.same_size(i2)) throw_data("images differ in size");
    const ByteImage fg1 = foreground_or_all(c, "fg1", i1.width, i1.height);
    const ByteImage fg2 = foreground_or_all(c, "fg2", i2.width, i2.height);
    if (probe && (!i1.inside(probe->first, probe->second)))
      throw_usage("probe lies outside image1");
    check_model_size(params, i1, "image1");
    const FeatureMap f1 = extract_features(params, i1);
    const FeatureMap f2 = extract_features(params, i2);
    const MatchResult m = nn_match(f1, f2, fg1, fg2);

    const std::string prefix(out_prefix);
    ensure_parent(prefix + ".flo");
    write_flo(prefix + ".flo", correspondence_to_flow(m.corr));
    const FloatImage vis = visibility_map(m);
    ByteImage vis_png(vis.width, vis.height, 1, 0);
    for (size_t i = 0; i < vis.data.size(); ++i)
      if (m.corr.valid.data[i])
        vis_png.data[i] =
            static_cast<std::uint8_t>(std::lround(std::clamp(vis.data[i], 0.0f, 1.0f) * 255.0f));
    write_png(prefix + "_visibility.png", vis_png);
    if (probe) {
      const FloatImage h = distance_heatmap(f1, probe->first, probe->second, f2, fg2);
      write_png(prefix + "_heatmap.png", render_heatmap(h));
      const float tx = m.corr.target.at(probe->first, probe->second, 0);
      const float ty = m.corr.target.at(probe->first, probe->second, 1);
      emit(log, user,
           "probe " + std::to_string(probe->first) + "," + std::to_string(probe->second) +
               " -> " + (std::isnan(tx) ? std::string("none")
                                        : std::to_string(static_cast<int>(tx)) + "," +
                                              std::to_string(static_cast<int>(ty))));
    }
  });
}

gf_status gf_run_eval(const gf_config* config, const char* checkpoint, const char* manifest,
                      const char* table_out, gf_log_fn log, void* user) {
  return guarded([&] {
    require(config, "config");
    require(manifest, "manifest");
    require(table_out, "table_out");
    const Config& c = config->config;
    const bool oracle = c.get_bool("oracle", false);
    const std::int64_t max_pairs = c.get_int("max_pairs", 0);
    if (max_pairs < 0) throw_usage("max_pairs must be nonnegative");
    if (!oracle && !checkpoint) throw_usage("eval needs a checkpoint unless oracle = true");
    Config resolved;
    if (checkpoint) resolved.set("checkpoint", checkpoint);
    resolved.set("manifest", manifest);
    resolved.set("out", table_out);
    resolved.set("oracle", oracle ? "true" : "false");
    resolved.set("max_pairs", std::to_string(max_pairs));
    emit_config(log, user, resolved);

    const Manifest m = load_manifest(manifest);
    std::optional<UNetParams> params;
    if (!oracle) params = load_params(checkpoint);
    const EvalTable table =
        evaluate(params ? &*params : nullptr, m, oracle, static_cast<size_t>(max_pairs));
    ensure_parent(table_out);
    std::ofstream out(table_out, std::ios::binary);
    if (!out) throw_io(std::string("cannot write ") + table_out);
    out << table.tsv();
    if (!out.flush()) throw_io(std::string("cannot write ") + table_out);
  });
}

gf_status gf_run_warp(const gf_config* config, const char* checkpoint, const char* image1,
                      const char* source, const char* out_png, gf_log_fn log, void* user) {
  return guarded([&] {
    require(config, "config");
    require(source, "source");
    require(out_png, "out_png");
    const Config& c = config->config;
    Config resolved;
    resolved.set("source", source);
    resolved.set("out", out_png);
    const FloatImage src = load_rgb(source);
    CorrespondenceField field;
    if (c.has("flow")) {
      resolved.set("flow", c.require_string("flow"));
      emit_config(log, user, resolved);
      field = field_from_flo(c.require_string("flow"));
    } else {
      if (!checkpoint || !image1) throw_usage("warp needs flow or a checkpoint and image1");
      resolved.set("checkpoint", checkpoint);
      resolved.set("image1", image1);
      for (const char* key : {"fg1", "fg2"})
        if (c.has(key)) resolved.set(key, c.require_string(key));
      emit_config(log, user, resolved);
      const FloatImage i1 = load_rgb(image1);
      if (!i1.same_size(src)) throw_data("images differ in size");
      field = match_images(load_params(checkpoint), i1, src,
                           foreground_or_all(c, "fg1", i1.width, i1.height),
                           foreground_or_all(c, "fg2", src.width, src.height))
                  .corr;
    }
    ensure_parent(out_png);
    write_png(out_png, to_bytes(warp_image(src, field)));
  });
}

gf_status gf_run_morph(const gf_config* config, const char* checkpoint, const char* image1,
                       const char* image2, const char* out_png, gf_log_fn log, void* user) {
  return guarded([&] {
    require(config, "config");
    require(image1, "image1");
    require(image2, "image2");
    require(out_png, "out_png");
    const Config& c = config->config;
    const bool from_flo = c.has("flow12") || c.has("flow21");
    if (from_flo && !(c.has("flow12") && c.has("flow21")))
      throw_usage("morph needs both flow12 and flow21");
    if (!from_flo && !checkpoint) throw_usage("morph needs flow12/flow21 or a checkpoint");
    if (c.has("t") && c.has("frames")) throw_usage("give either t or frames");
    const std::int64_t frames = c.get_int("frames", 0);
    if (c.has("frames") && frames < 2) throw_usage("frames must be at least 2");
    const double t = c.get_double("t", 0.5);
    Config resolved;
    resolved.set("image1", image1);
    resolved.set("image2", image2);
    resolved.set("out", out_png);
    if (frames)
      resolved.set("frames", std::to_string(frames));
    else
      resolved.set("t", num17(t));
    if (from_flo) {
      resolved.set("flow12", c.require_string("flow12"));
      resolved.set("flow21", c.require_string("flow21"));
    } else {
      resolved.set("checkpoint", checkpoint);
      for (const char* key : {"fg1", "fg2"})
        if (c.has(key)) resolved.set(key, c.require_string(key));
    }
    emit_config(log, user, resolved);

    const FloatImage i1 = load_rgb(image1), i2 = load_rgb(image2);
    if (!i1.same_size(i2)) throw_data("images differ in size");
    CorrespondenceField c12, c21;
    if (from_flo) {
      c12 = field_from_flo(c.require_string("flow12"));
      c21 = field_from_flo(c.require_string("flow21"));
    } else {
      const UNetParams params = load_params(checkpoint);
      const ByteImage fg1 = foreground_or_all(c, "fg1", i1.width, i1.height);
      const ByteImage fg2 = foreground_or_all(c, "fg2", i2.width, i2.height);
      c12 = match_images(params, i1, i2, fg1, fg2).corr;
      c21 = match_images(params, i2, i1, fg2, fg1).corr;
    }
    ensure_parent(out_png);
    if (!frames) {
      write_png(out_png, to_bytes(morph(i1, i2, c12, c21, t)));
      return;
    }
    for (int i = 0; i < frames; ++i) {
      const double ti = static_cast<double>(i) / static_cast<double>(frames - 1);
      write_png(frame_path(out_png, i), to_bytes(morph(i1, i2, c12, c21, ti)));
    }
  });
}

gf_status gf_run_geodesic(const gf_config* config, const char* mesh, const char* out,
                          gf_log_fn log, void* user) {
  return guarded([&] {
    require(config, "config");
    require(mesh, "mesh");
    const Config& c = config->config;
    const std::string method = c.get_string("method", "exact");
    if (method != "exact" && method != "graph") throw_usage("method must be exact or graph");
    const std::int64_t k = c.get_int("k", 8);
    if (k < 0) throw_usage("k must be nonnegative");
    const bool compare = c.get_bool("compare", false);
    const std::string source = c.require_string("source");
    if (!out && !compare) throw_usage("geodesic needs an output path or compare = true");
    Config resolved;
    resolved.set("mesh", mesh);
    resolved.set("source", source);
    resolved.set("method", method);
    resolved.set("k", std::to_string(k));
    resolved.set("compare", compare ? "true" : "false");
    if (out) resolved.set("out", out);
    emit_config(log, user, resolved);

    const GeodesicSolver solver(load_mesh(mesh));
    const SurfacePoint sp = parse_source(solver.mesh(), source);
    std::optional<GeodesicField> exact, graph;
    if (method == "exact" || compare) exact = solver.exact(sp);
    if (method == "graph" || compare) graph = solver.graph(sp, static_cast<int>(k));
    if (compare) {
      double worst = 0, min_gap = std::numeric_limits<double>::infinity();
      for (size_t v = 0; v < exact->distance.size(); ++v) {
        const double e = exact->distance[v], g = graph->distance[v];
        min_gap = std::min(min_gap, g - e);
        if (e > 0) worst = std::max(worst, std::fabs(g - e) / e);
      }
      emit(log, user, "max_relative_disagreement = " + num17(worst));
      emit(log, user, "min_graph_minus_exact = " + num17(min_gap));
      emit(log, user, std::string("graph_ge_exact = ") + (min_gap >= -1e-9 ? "true" : "false"));
    }
    if (!out) return;
    const std::vector<double>& d = (method == "exact" ? exact : graph)->distance;
    ensure_parent(out);
    if (fs::path(out).extension() == ".pfm") {
      FloatImage row(static_cast<int>(d.size()), 1, 1);
      for (size_t v = 0; v < d.size(); ++v) row.data[v] = static_cast<float>(d[v]);
      write_pfm(out, row);
      return;
    }
    std::ofstream file(out, std::ios::binary);
    if (!file) throw_io(std::string("cannot write ") + out);
    for (double v : d) file << num17(v) << '\n';
    if (!file.flush()) throw_io(std::string("cannot write ") + out);
  });
}

}  // extern "C"
