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

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "geofeat/geofeat.h"
#include "geofeat/image_io.hpp"
#include "geofeat/mesh.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using geofeat::testing::read_bytes;
using geofeat::testing::scratch_dir;

namespace {

struct CliResult {
  int code;
  std::string output;
};

CliResult cli(const std::string& args) {
  const fs::path out = fs::temp_directory_path() / "geofeat_cli_output.txt";
  const std::string cmd = std::string(GEOFEAT_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_bytes(out)};
}

const std::string kSmall = " --width 64 --height 96 --focal 125";

// Small dataset shared by the tests below.
const fs::path& toy_data() {
  static const fs::path dir = [] {
    const fs::path d = scratch_dir("cli_toy");
    const CliResult r = cli("gen-data --pairs 3 --seed 4 --out " + (d / "data").string() + kSmall);
    REQUIRE(r.code == 0);
    return d / "data";
  }();
  return dir;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, '\t');) out.push_back(f);
  return out;
}

size_t record_count(const fs::path& manifest) {
  size_t n = 0;
  bool header = false;
  for (const std::string& l : lines(read_bytes(manifest))) {
    if (l.empty() || l[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("gen-data is reproducible and writes every artifact") {
  const fs::path d = scratch_dir("cli_gen");
  const std::string args = "gen-data --pairs 8 --seed 1" + kSmall + " --out ";
  REQUIRE(cli(args + (d / "a").string()).code == 0);
  REQUIRE(cli(args + (d / "b").string()).code == 0);
  CHECK(read_bytes(d / "a/manifest.tsv") == read_bytes(d / "b/manifest.tsv"));
  CHECK(record_count(d / "a/manifest.tsv") == 8);
  for (const auto& e : fs::directory_iterator(d / "a")) {
    if (!e.is_directory()) continue;
    for (const char* f : {"rgb1.png", "rgb2.png", "flow12.flo", "flow21.flo", "vis12.png",
                          "vis21.png", "geo1.pfm", "geo2.pfm"})
      CHECK(fs::exists(e.path() / f));
    CHECK(read_bytes(e.path() / "rgb1.png") ==
          read_bytes(d / "b" / e.path().filename() / "rgb1.png"));
  }
}

TEST_CASE("gen-data with zero pairs writes an empty manifest") {
  const fs::path d = scratch_dir("cli_gen0");
  const CliResult r = cli("gen-data --pairs 0" + kSmall + " --out " + d.string());
  CHECK(r.code == 0);
  CHECK(record_count(d / "manifest.tsv") == 0);
}

TEST_CASE("gen-data logs the resolved settings with seed 0 by default") {
  const fs::path d = scratch_dir("cli_gen_log");
  const CliResult r = cli("gen-data --pairs 0 --set limbs=4 --out " + d.string());
  REQUIRE(r.code == 0);
  CHECK(r.output.find("seed = 0\n") != std::string::npos);
  CHECK(r.output.find("limbs = 4\n") != std::string::npos);
  CHECK(r.output.find("width = 256\n") != std::string::npos);
}

TEST_CASE("train with zero steps writes the initialization") {
  const fs::path d = scratch_dir("cli_train0");
  const std::string manifest = (toy_data() / "manifest.tsv").string();
  REQUIRE(cli("train --loss full --steps 0 --seed 3 --train " + manifest + " --out " +
              (d / "ck.gpsw").string())
              .code == 0);
  gf_config* c = nullptr;
  REQUIRE(gf_config_new(&c) == GF_OK);
  REQUIRE(gf_config_set(c, "seed", "3") == GF_OK);
  gf_model* m = nullptr;
  REQUIRE(gf_model_init(c, &m) == GF_OK);
  REQUIRE(gf_model_save(m, (d / "init.gpsw").c_str()) == GF_OK);
  CHECK(read_bytes(d / "ck.gpsw") == read_bytes(d / "init.gpsw"));
  gf_model_free(m);
  gf_config_free(c);
}

TEST_CASE("train log and loss selection") {
  const fs::path d = scratch_dir("cli_train");
  const std::string base = "train --steps 3 --seed 2 --train " +
                           (toy_data() / "manifest.tsv").string() + " --val " +
                           (toy_data() / "manifest.tsv").string() + " --set val_pairs=1";
  REQUIRE(cli(base + " --loss full --out " + (d / "full.gpsw").string() + " --log " +
              (d / "full.log").string())
              .code == 0);
  REQUIRE(cli(base + " --loss triplet --out " + (d / "trip.gpsw").string()).code == 0);
  CHECK(read_bytes(d / "full.gpsw") != read_bytes(d / "trip.gpsw"));

  const auto log = lines(read_bytes(d / "full.log"));
  REQUIRE(log.size() == 5);
  CHECK(log[0] == "step\tloss\tval_aepe");
  int prev = -1;
  for (size_t i = 1; i + 1 < log.size(); ++i) {
    const auto f = fields(log[i]);
    REQUIRE(f.size() == 3);
    const int step = std::stoi(f[0]);
    CHECK(step > prev);
    prev = step;
    CHECK(std::isfinite(std::stod(f[1])));
  }
  CHECK(cli(base + " --loss nonsense --out " + (d / "x.gpsw").string()).code == 1);
}

TEST_CASE("eval: oracle, aggregate row and determinism") {
  const fs::path d = scratch_dir("cli_eval");
  const std::string manifest = (toy_data() / "manifest.tsv").string();
  REQUIRE(cli("eval --oracle --manifest " + manifest + " --out " + (d / "o.tsv").string())
              .code == 0);
  for (const std::string& l : lines(read_bytes(d / "o.tsv"))) {
    const auto f = fields(l);
    if (f[0] == "id") continue;
    CHECK(f[1] == "0");
    CHECK(f[2] == "0");
  }

  REQUIRE(cli("train --steps 0 --train " + manifest + " --out " + (d / "ck.gpsw").string())
              .code == 0);
  const std::string args = "eval --checkpoint " + (d / "ck.gpsw").string() + " --manifest " +
                           manifest + " --out ";
  REQUIRE(cli(args + (d / "a.tsv").string()).code == 0);
  REQUIRE(cli(args + (d / "b.tsv").string()).code == 0);
  CHECK(read_bytes(d / "a.tsv") == read_bytes(d / "b.tsv"));

  const auto rows = lines(read_bytes(d / "a.tsv"));
  REQUIRE(rows.size() == 5);
  const auto mean = fields(rows.back());
  CHECK(mean[0] == "mean");
  for (size_t col = 1; col <= 5; ++col) {
    double sum = 0;
    for (size_t r = 1; r + 1 < rows.size(); ++r) sum += std::stod(fields(rows[r])[col]);
    CHECK(std::fabs(sum / 3.0 - std::stod(mean[col])) < 1e-9 * std::max(1.0, std::fabs(sum)));
  }
}

TEST_CASE("match writes its artifacts and reports errors by exit code") {
  const fs::path d = scratch_dir("cli_match");
  const std::string manifest = (toy_data() / "manifest.tsv").string();
  REQUIRE(cli("train --steps 0 --train " + manifest + " --out " + (d / "ck.gpsw").string())
              .code == 0);
  const fs::path pair = toy_data() / "pair0000";
  const std::string images = " --image1 " + (pair / "rgb1.png").string() + " --image2 " +
                             (pair / "rgb2.png").string();
  const CliResult ok = cli("match --checkpoint " + (d / "ck.gpsw").string() + images +
                           " --fg1 " + (pair / "face1.pfm").string() + " --fg2 " +
                           (pair / "face2.pfm").string() + " --probe 32,48 --out " +
                           (d / "m").string());
  REQUIRE(ok.code == 0);
  const geofeat::FloatImage flow = geofeat::read_flo((d / "m.flo").string());
  CHECK(flow.width == 64);
  CHECK(flow.height == 96);
  CHECK(geofeat::read_png((d / "m_visibility.png").string()).channels == 1);
  const geofeat::ByteImage heat = geofeat::read_png((d / "m_heatmap.png").string());
  int red = 0;
  for (size_t i = 0; i < heat.data.size(); i += 3)
    red += heat.data[i] == 255 && heat.data[i + 1] == 0 && heat.data[i + 2] == 0;
  CHECK(red == 1);

  const CliResult missing =
      cli("match --checkpoint " + (d / "none.gpsw").string() + images + " --out " +
          (d / "x").string());
  CHECK(missing.code == 2);
  CHECK(missing.output.find("none.gpsw") != std::string::npos);
  CHECK(cli("match --checkpoint " + (d / "ck.gpsw").string() + images).code == 1);
  CHECK(cli("frobnicate").code == 1);
}

TEST_CASE("warp and morph endpoints") {
  const fs::path d = scratch_dir("cli_warp");
  const fs::path pair = toy_data() / "pair0000";
  geofeat::FloatImage zero(64, 96, 2, 0.0f);
  geofeat::write_flo((d / "zero.flo").string(), zero);
  const std::string rgb1 = (pair / "rgb1.png").string(), rgb2 = (pair / "rgb2.png").string();
  REQUIRE(cli("warp --source " + rgb2 + " --flow " + (d / "zero.flo").string() + " --out " +
              (d / "w.png").string())
              .code == 0);
  CHECK(geofeat::read_png((d / "w.png").string()).data == geofeat::read_png(rgb2).data);

  const std::string flows = " --flow12 " + (pair / "flow12.flo").string() + " --flow21 " +
                            (pair / "flow21.flo").string();
  REQUIRE(cli("morph --image1 " + rgb1 + " --image2 " + rgb2 + flows + " --frames 3 --out " +
              (d / "f.png").string())
              .code == 0);
  CHECK(geofeat::read_png((d / "f_000.png").string()).data == geofeat::read_png(rgb1).data);
  CHECK(geofeat::read_png((d / "f_002.png").string()).data == geofeat::read_png(rgb2).data);
  CHECK(fs::exists(d / "f_001.png"));
  CHECK(cli("morph --image1 " + rgb1 + " --image2 " + rgb2 + flows + " --t 2 --out " +
            (d / "g.png").string())
            .code == 1);
}

TEST_CASE("geodesic subcommand") {
  const fs::path d = scratch_dir("cli_geodesic");
  const fs::path plane = d / "plane.obj";
  geofeat::save_mesh(geofeat::make_grid(6, 6, 1.0, 1.0), plane.string());
  const CliResult cmp = cli("geodesic --mesh " + plane.string() + " --source v:7 --compare");
  REQUIRE(cmp.code == 0);
  CHECK(cmp.output.find("graph_ge_exact = true") != std::string::npos);

  const fs::path sphere = d / "sphere.obj";
  const geofeat::TriangleMesh s = geofeat::make_icosphere(4, 1.0);
  geofeat::save_mesh(s, sphere.string());
  int anti = 0;
  for (int v = 1; v < s.vertex_count(); ++v) {
    const auto& a = s.vertices[0];
    const auto& b = s.vertices[v];
    const auto& c = s.vertices[anti];
    if ((a + b).norm() < (a + c).norm()) anti = v;
  }
  REQUIRE(cli("geodesic --mesh " + sphere.string() + " --source v:0 --out " +
              (d / "dist.txt").string())
              .code == 0);
  const auto dist = lines(read_bytes(d / "dist.txt"));
  CHECK(dist.size() == s.vertices.size());
  CHECK(std::fabs(std::stod(dist[static_cast<size_t>(anti)]) - M_PI) < 0.01 * M_PI);

  REQUIRE(cli("geodesic --mesh " + sphere.string() +
              " --source f:3:0.2,0.3 --method graph --k 2 --out " + (d / "dist.pfm").string())
              .code == 0);
  CHECK(geofeat::read_pfm((d / "dist.pfm").string()).width == s.vertex_count());
  CHECK(cli("geodesic --mesh " + (d / "missing.obj").string() + " --source v:0 --out x").code ==
        2);
  CHECK(cli("geodesic --mesh " + sphere.string() + " --source q:1 --out x").code == 1);
}

TEST_CASE("C API handles and errors") {
  gf_config* c = nullptr;
  REQUIRE(gf_config_new(&c) == GF_OK);
  CHECK(gf_config_set_assignment(c, "plan=8,16") == GF_OK);
  CHECK(gf_config_set_assignment(c, "no equals sign") == GF_ERR_USAGE);
  CHECK(std::string(gf_last_error()).size() > 0);
  CHECK(gf_config_set(c, nullptr, "x") == GF_ERR_USAGE);
  char* text = nullptr;
  REQUIRE(gf_config_dump(c, &text) == GF_OK);
  CHECK(std::string(text) == "plan = 8,16\n");
  gf_string_free(text);

  gf_model* m = nullptr;
  REQUIRE(gf_model_init(c, &m) == GF_OK);
  const int dim = gf_model_feature_dim(m);
  CHECK(dim == 16);
  std::vector<float> rgb(8 * 6 * 3, 0.5f), feat(8 * 6 * static_cast<size_t>(dim));
  for (size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<float>(i % 7) / 7.0f;
  REQUIRE(gf_model_extract(m, rgb.data(), 6, 8, feat.data(), feat.size()) == GF_OK);
  for (size_t p = 0; p < 48; ++p) {
    double ss = 0;
    for (int k = 0; k < dim; ++k) ss += double(feat[p * dim + k]) * feat[p * dim + k];
    CHECK(std::fabs(ss - 1.0) < 1e-5);
  }
  CHECK(gf_model_extract(m, rgb.data(), 5, 8, feat.data(), feat.size()) == GF_ERR_DATA);
  CHECK(gf_model_extract(m, rgb.data(), 6, 8, feat.data(), 10) == GF_ERR_USAGE);
  CHECK(gf_model_load("/nonexistent/ck.gpsw", &m) == GF_ERR_IO);
  gf_model_free(m);
  gf_config_free(c);
}

TEST_CASE("C API log callback receives the resolved settings") {
  const fs::path d = scratch_dir("cli_capi_log");
  gf_config* c = nullptr;
  REQUIRE(gf_config_new(&c) == GF_OK);
  gf_config_set(c, "pairs", "0");
  std::vector<std::string> got;
  const auto sink = [](const char* line, void* user) {
    static_cast<std::vector<std::string>*>(user)->push_back(line);
  };
  REQUIRE(gf_run_gen_data(c, d.c_str(), sink, &got) == GF_OK);
  CHECK(std::find(got.begin(), got.end(), "views = 2") != got.end());
  gf_config_free(c);
}
