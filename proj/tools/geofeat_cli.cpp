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

// geofeat command-line tool. Thin layer over the C API: flags become config
// keys, and the exit code follows the returned status (0 ok, 1 usage,
// 2 anything else).

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "geofeat/geofeat.h"

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<long long> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "key = value settings file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "override a setting, key=value (repeatable)");
  cmd->add_option("--seed", c.seed, "random seed (default 0)");
}

void print_line(const char* line, void*) { std::printf("%s\n", line); }

class Run {
 public:
  Run() { gf_config_new(&cfg_); }
  ~Run() { gf_config_free(cfg_); }
  Run(const Run&) = delete;
  Run& operator=(const Run&) = delete;

  // Settings file first, then --set, then dedicated flags.
  bool prepare(const Common& c) {
    if (!c.config_file.empty() && !ok(gf_config_load(cfg_, c.config_file.c_str()))) return false;
    for (const std::string& s : c.sets)
      if (!ok(gf_config_set_assignment(cfg_, s.c_str()))) return false;
    if (c.seed) set("seed", std::to_string(*c.seed));
    return status_ == GF_OK;
  }
  void set(const char* key, const std::string& value) {
    if (status_ == GF_OK) ok(gf_config_set(cfg_, key, value.c_str()));
  }
  template <typename T>
  void set_opt(const char* key, const std::optional<T>& v) {
    if (!v) return;
    if constexpr (std::is_same_v<T, std::string>)
      set(key, *v);
    else
      set(key, std::to_string(*v));
  }
  bool ok(gf_status s) {
    if (s != GF_OK && status_ == GF_OK) {
      status_ = s;
      std::fprintf(stderr, "error: %s\n", gf_last_error());
    }
    return s == GF_OK;
  }
  gf_config* cfg() const { return cfg_; }
  int exit_code() const {
    if (status_ == GF_OK) return 0;
    return status_ == GF_ERR_USAGE ? 1 : 2;
  }
  bool failed() const { return status_ != GF_OK; }

 private:
  gf_config* cfg_ = nullptr;
  gf_status status_ = GF_OK;
};

const char* opt_cstr(const std::optional<std::string>& s) { return s ? s->c_str() : nullptr; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geofeat: learned per-pixel features for matching people across images"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(gf_version()));

  Common common;

  auto* gen = app.add_subcommand("gen-data", "render a synthetic dataset");
  add_common(gen, common);
  std::string gen_out;
  std::optional<int> pairs, views, width, height;
  std::optional<double> focal;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--pairs", pairs, "number of records");
  gen->add_option("--views", views, "views per record, 2 or 3");
  gen->add_option("--width", width);
  gen->add_option("--height", height);
  gen->add_option("--focal", focal, "focal length in pixels");

  auto* tr = app.add_subcommand("train", "train a feature network");
  add_common(tr, common);
  std::string tr_train, tr_out;
  std::optional<std::string> tr_val, tr_log, tr_loss, tr_plan;
  std::optional<int> tr_steps, tr_batch;
  std::optional<double> tr_lr;
  tr->add_option("--train", tr_train, "training manifest")->required();
  tr->add_option("--val", tr_val, "validation manifest");
  tr->add_option("--out", tr_out, "checkpoint to write")->required();
  tr->add_option("--log", tr_log, "training log file");
  tr->add_option("--loss", tr_loss, "full, triplet, or terms joined by + (c, s, d, cd, t)");
  tr->add_option("--steps", tr_steps);
  tr->add_option("--batch", tr_batch, "pairs per step");
  tr->add_option("--lr", tr_lr);
  tr->add_option("--plan", tr_plan, "encoder widths, e.g. 16,32,64");

  auto* ma = app.add_subcommand("match", "dense correspondence between two images");
  add_common(ma, common);
  std::string ma_ck, ma_i1, ma_i2, ma_out;
  std::optional<std::string> ma_probe, ma_fg1, ma_fg2;
  ma->add_option("--checkpoint", ma_ck)->required();
  ma->add_option("--image1", ma_i1)->required();
  ma->add_option("--image2", ma_i2)->required();
  ma->add_option("--out", ma_out, "output prefix")->required();
  ma->add_option("--probe", ma_probe, "x,y pixel of image1 for a distance heatmap");
  ma->add_option("--fg1", ma_fg1, "foreground of image1 (PNG mask or face PFM)");
  ma->add_option("--fg2", ma_fg2, "foreground of image2");

  auto* ev = app.add_subcommand("eval", "metrics table over a manifest");
  add_common(ev, common);
  std::optional<std::string> ev_ck;
  std::string ev_manifest, ev_out = "/dev/stdout";
  bool ev_oracle = false;
  std::optional<int> ev_max;
  ev->add_option("--checkpoint", ev_ck);
  ev->add_option("--manifest", ev_manifest)->required();
  ev->add_option("--out", ev_out, "table file (default stdout)");
  ev->add_flag("--oracle", ev_oracle, "use the ground-truth fields as predictions");
  ev->add_option("--max-pairs", ev_max);

  auto* wa = app.add_subcommand("warp", "warp an image into another's frame");
  add_common(wa, common);
  std::string wa_src, wa_out;
  std::optional<std::string> wa_ck, wa_i1, wa_flow, wa_fg1, wa_fg2;
  wa->add_option("--source", wa_src, "image to warp")->required();
  wa->add_option("--out", wa_out)->required();
  wa->add_option("--flow", wa_flow, ".flo field from the target frame into source");
  wa->add_option("--checkpoint", wa_ck);
  wa->add_option("--image1", wa_i1, "target frame, matched against source");
  wa->add_option("--fg1", wa_fg1);
  wa->add_option("--fg2", wa_fg2);

  auto* mo = app.add_subcommand("morph", "interpolate between two images");
  add_common(mo, common);
  std::string mo_i1, mo_i2, mo_out;
  std::optional<std::string> mo_ck, mo_f12, mo_f21, mo_fg1, mo_fg2;
  std::optional<double> mo_t;
  std::optional<int> mo_frames;
  mo->add_option("--image1", mo_i1)->required();
  mo->add_option("--image2", mo_i2)->required();
  mo->add_option("--out", mo_out)->required();
  mo->add_option("--checkpoint", mo_ck);
  mo->add_option("--flow12", mo_f12);
  mo->add_option("--flow21", mo_f21);
  mo->add_option("--fg1", mo_fg1);
  mo->add_option("--fg2", mo_fg2);
  auto* t_opt = mo->add_option("--t", mo_t, "blend position in [0,1] (default 0.5)");
  mo->add_option("--frames", mo_frames, "write this many evenly spaced frames")->excludes(t_opt);

  auto* ge = app.add_subcommand("geodesic", "geodesic distances on a mesh");
  add_common(ge, common);
  std::string ge_mesh;
  std::optional<std::string> ge_source, ge_method, ge_out;
  std::optional<int> ge_k;
  bool ge_compare = false;
  ge->add_option("--mesh", ge_mesh)->required();
  ge->add_option("--source", ge_source, "v:<vertex> or f:<face>:<b1>,<b2>");
  ge->add_option("--method", ge_method, "exact or graph");
  ge->add_option("--k", ge_k, "Steiner points per edge for the graph method");
  ge->add_option("--out", ge_out, "per-vertex text, or a one-row PFM for .pfm");
  ge->add_flag("--compare", ge_compare, "report exact-vs-graph disagreement");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  Run run;
  if (!run.prepare(common)) return run.exit_code();

  if (gen->parsed()) {
    run.set_opt("pairs", pairs);
    run.set_opt("views", views);
    run.set_opt("width", width);
    run.set_opt("height", height);
    if (focal) run.set("focal", CLI::detail::to_string(*focal));
    if (!run.failed())
      run.ok(gf_run_gen_data(run.cfg(), gen_out.c_str(), print_line, nullptr));
  } else if (tr->parsed()) {
    run.set_opt("loss", tr_loss);
    run.set_opt("steps", tr_steps);
    run.set_opt("batch", tr_batch);
    run.set_opt("plan", tr_plan);
    if (tr_lr) run.set("lr", CLI::detail::to_string(*tr_lr));
    if (!run.failed())
      run.ok(gf_run_train(run.cfg(), tr_train.c_str(), opt_cstr(tr_val), tr_out.c_str(),
                          opt_cstr(tr_log), print_line, nullptr));
  } else if (ma->parsed()) {
    run.set_opt("probe", ma_probe);
    run.set_opt("fg1", ma_fg1);
    run.set_opt("fg2", ma_fg2);
    if (!run.failed())
      run.ok(gf_run_match(run.cfg(), ma_ck.c_str(), ma_i1.c_str(), ma_i2.c_str(),
                          ma_out.c_str(), print_line, nullptr));
  } else if (ev->parsed()) {
    if (ev_oracle) run.set("oracle", "true");
    run.set_opt("max_pairs", ev_max);
    // The table may go to stdout, so settings are not echoed there.
    if (!run.failed())
      run.ok(gf_run_eval(run.cfg(), opt_cstr(ev_ck), ev_manifest.c_str(), ev_out.c_str(),
                         nullptr, nullptr));
  } else if (wa->parsed()) {
    run.set_opt("flow", wa_flow);
    run.set_opt("fg1", wa_fg1);
    run.set_opt("fg2", wa_fg2);
    if (!run.failed())
      run.ok(gf_run_warp(run.cfg(), opt_cstr(wa_ck), opt_cstr(wa_i1), wa_src.c_str(),
                         wa_out.c_str(), print_line, nullptr));
  } else if (mo->parsed()) {
    run.set_opt("flow12", mo_f12);
    run.set_opt("flow21", mo_f21);
    run.set_opt("fg1", mo_fg1);
    run.set_opt("fg2", mo_fg2);
    if (mo_t) run.set("t", CLI::detail::to_string(*mo_t));
    run.set_opt("frames", mo_frames);
    if (!run.failed())
      run.ok(gf_run_morph(run.cfg(), opt_cstr(mo_ck), mo_i1.c_str(), mo_i2.c_str(),
                          mo_out.c_str(), print_line, nullptr));
  } else if (ge->parsed()) {
    run.set_opt("source", ge_source);
    run.set_opt("method", ge_method);
    run.set_opt("k", ge_k);
    if (ge_compare) run.set("compare", "true");
    if (!run.failed())
      run.ok(gf_run_geodesic(run.cfg(), ge_mesh.c_str(), opt_cstr(ge_out), print_line, nullptr));
  }
  return run.exit_code();
}
