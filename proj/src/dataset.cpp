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

#include "geofeat/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "geofeat/error.hpp"
#include "geofeat/geodesic.hpp"

namespace geofeat {
namespace fs = std::filesystem;
namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string pair_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", i);
  return buf;
}

Raster<std::uint8_t> mask_png(const Raster<std::uint8_t>& mask) {
  Raster<std::uint8_t> out(mask.width, mask.height, 1, 0);
  for (size_t i = 0; i < mask.data.size(); ++i) out.data[i] = mask.data[i] ? 255 : 0;
  return out;
}

FloatImage face_raster(const Raster<int>& face) {
  FloatImage out(face.width, face.height, 1);
  for (size_t i = 0; i < face.data.size(); ++i)
    out.data[i] = static_cast<float>(face.data[i]);
  return out;
}

FloatImage stack(const std::vector<FloatImage>& rasters, int w, int h) {
  FloatImage out(w, h * static_cast<int>(rasters.size()), 1);
  for (size_t s = 0; s < rasters.size(); ++s)
    std::copy(rasters[s].data.begin(), rasters[s].data.end(),
              out.data.begin() + static_cast<long>(s) * w * h);
  return out;
}

// Up to `count` distinct pixels, the first half (rounded up) drawn from
// `preferred` when it is nonempty, the rest from `all`.
std::vector<std::pair<int, int>> pick_pixels(
    Rng& rng, const std::vector<std::pair<int, int>>& preferred,
    const std::vector<std::pair<int, int>>& all, int count) {
  std::vector<std::pair<int, int>> out;
  const int from_preferred = preferred.empty() ? 0 : (count + 1) / 2;
  auto draw = [&](const std::vector<std::pair<int, int>>& pool) {
    for (int tries = 0; tries < 64; ++tries) {
      const auto p = pool[rng.below(pool.size())];
      if (std::find(out.begin(), out.end(), p) == out.end()) {
        out.push_back(p);
        return;
      }
    }
  };
  for (int i = 0; i < count; ++i)
    draw(i < from_preferred ? preferred : all);
  return out;
}

void write_view(const RenderedView& v, const fs::path& dir, int index) {
  const std::string n = std::to_string(index);
  write_png((dir / ("rgb" + n + ".png")).string(), to_bytes(v.rgb));
  write_pfm((dir / ("face" + n + ".pfm")).string(), face_raster(v.face));
  write_pfm((dir / ("bary" + n + ".pfm")).string(), v.bary);
  write_pfm((dir / ("depth" + n + ".pfm")).string(), v.depth);
}

void write_corr(const CorrespondenceField& c, const fs::path& dir,
                const std::string& tag) {
  write_flo((dir / ("flow" + tag + ".flo")).string(), correspondence_to_flow(c));
  write_png((dir / ("valid" + tag + ".png")).string(), mask_png(c.valid));
  write_png((dir / ("vis" + tag + ".png")).string(), mask_png(c.visible));
}

std::vector<std::string> view_columns(int i) {
  const std::string n = std::to_string(i);
  return {"rgb" + n, "face" + n, "bary" + n, "depth" + n};
}

std::vector<std::string> corr_columns(const std::string& tag) {
  return {"flow" + tag, "valid" + tag, "vis" + tag};
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, '\t')) out.push_back(cell);
  return out;
}

}  // namespace

std::vector<RenderedView> render_record(const ArticulatedModel& model,
                                       const DatasetConfig& config, int index,
                                       Rng& rng) {
  if (index < 0) throw_usage("record index must be nonnegative");
  const double limit = config.joint_limit_deg * kDegToRad;
  std::vector<RenderedView> views;
  const auto cams = sample_cameras(rng, model.center, config.rig, config.views);
  for (int v = 0; v < config.views; ++v) {
    auto mesh = std::make_shared<const TriangleMesh>(
        pose_model(model, sample_pose(model, rng, limit)));
    views.push_back(rasterize(mesh, model.texture, cams[v]));
  }
  return views;
}

std::vector<RenderedView> render_record(const ArticulatedModel& model,
                                       const DatasetConfig& config, int index) {
  Rng rng(config.seed, "pair/" + pair_id(index));
  return render_record(model, config, index, rng);
}

DatasetConfig DatasetConfig::from_config(const Config& c) {
  DatasetConfig d;
  d.pairs = static_cast<int>(c.get_int("pairs", d.pairs));
  d.seed = static_cast<std::uint64_t>(c.get_int("seed", 0));
  d.model_seed = static_cast<std::uint64_t>(c.get_int("model_seed", 0));
  d.views = static_cast<int>(c.get_int("views", d.views));
  d.limbs = static_cast<int>(c.get_int("limbs", d.limbs));
  d.segments = static_cast<int>(c.get_int("segments", d.segments));
  d.joint_limit_deg = c.get_double("joint_limit_deg", d.joint_limit_deg);
  d.sources_per_view =
      static_cast<int>(c.get_int("sources_per_view", d.sources_per_view));
  d.rig.width = static_cast<int>(c.get_int("width", d.rig.width));
  d.rig.height = static_cast<int>(c.get_int("height", d.rig.height));
  d.rig.focal = c.get_double("focal", d.rig.focal);
  d.rig.min_distance = c.get_double("min_distance", d.rig.min_distance);
  d.rig.max_distance = c.get_double("max_distance", d.rig.max_distance);
  d.rig.max_angle_deg = c.get_double("max_angle_deg", d.rig.max_angle_deg);
  d.rig.max_elevation_deg =
      c.get_double("max_elevation_deg", d.rig.max_elevation_deg);
  if (d.pairs < 0) throw_usage("pairs must be nonnegative");
  if (d.views != 2 && d.views != 3) throw_usage("views must be 2 or 3");
  if (d.sources_per_view < 1) throw_usage("sources_per_view must be positive");
  return d;
}

Config DatasetConfig::to_config() const {
  Config c;
  c.set("pairs", std::to_string(pairs));
  c.set("seed", std::to_string(seed));
  c.set("model_seed", std::to_string(model_seed));
  c.set("views", std::to_string(views));
  c.set("limbs", std::to_string(limbs));
  c.set("segments", std::to_string(segments));
  c.set("joint_limit_deg", fmt_double(joint_limit_deg));
  c.set("sources_per_view", std::to_string(sources_per_view));
  c.set("width", std::to_string(rig.width));
  c.set("height", std::to_string(rig.height));
  c.set("focal", fmt_double(rig.focal));
  c.set("min_distance", fmt_double(rig.min_distance));
  c.set("max_distance", fmt_double(rig.max_distance));
  c.set("max_angle_deg", fmt_double(rig.max_angle_deg));
  c.set("max_elevation_deg", fmt_double(rig.max_elevation_deg));
  return c;
}

std::string generate_dataset(const DatasetConfig& config,
                             const std::string& out_dir) {
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw_io("cannot create " + out_dir + ": " + ec.message());

  const ArticulatedModel model =
      build_toy_humanoid(config.model_seed, config.limbs, config.segments);
  const GeodesicSolver solver(model.rest);
  const double g_scale = geodesic_diameter(solver, 16, config.model_seed);
  const int w = config.rig.width, h = config.rig.height;
  const int k = config.sources_per_view;

  std::vector<std::string> columns{"id"};
  for (int v = 1; v <= 2; ++v)
    for (auto& c : view_columns(v)) columns.push_back(c);
  for (const char* tag : {"12", "21"})
    for (auto& c : corr_columns(tag)) columns.push_back(c);
  columns.insert(columns.end(), {"geo1", "geo2", "sources"});
  if (config.views == 3) {
    for (auto& c : view_columns(3)) columns.push_back(c);
    for (auto& c : corr_columns("13")) columns.push_back(c);
  }

  std::ostringstream manifest;
  manifest << "# geofeat dataset\n"
           << "# seed=" << config.seed << "\n"
           << "# model_seed=" << config.model_seed << "\n"
           << "# pairs=" << config.pairs << "\n"
           << "# views=" << config.views << "\n"
           << "# width=" << w << "\n"
           << "# height=" << h << "\n"
           << "# focal=" << fmt_double(config.rig.focal) << "\n"
           << "# min_distance=" << fmt_double(config.rig.min_distance) << "\n"
           << "# max_distance=" << fmt_double(config.rig.max_distance) << "\n"
           << "# max_angle_deg=" << fmt_double(config.rig.max_angle_deg) << "\n"
           << "# max_elevation_deg=" << fmt_double(config.rig.max_elevation_deg) << "\n"
           << "# limbs=" << config.limbs << "\n"
           << "# segments=" << config.segments << "\n"
           << "# joint_limit_deg=" << fmt_double(config.joint_limit_deg) << "\n"
           << "# sources_per_view=" << k << "\n"
           << "# g_scale=" << fmt_double(g_scale) << "\n";
  for (size_t c = 0; c < columns.size(); ++c)
    manifest << (c ? "\t" : "") << columns[c];
  manifest << "\n";

  for (int i = 0; i < config.pairs; ++i) {
    const std::string id = pair_id(i);
    const fs::path dir = root / ("pair" + id);
    fs::create_directories(dir, ec);
    if (ec) throw_io("cannot create " + dir.string() + ": " + ec.message());
    Rng rng(config.seed, "pair/" + id);
    const std::vector<RenderedView> views = render_record(model, config, i, rng);
    const CorrespondenceField c12 = correspondence_field(views[0], views[1]);
    const CorrespondenceField c21 = correspondence_field(views[1], views[0]);

    std::vector<SourcePixel> sources;
    for (int v = 0; v < 2; ++v) {
      const CorrespondenceField& c = v == 0 ? c12 : c21;
      std::vector<std::pair<int, int>> vis, fg;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (!views[v].foreground(x, y)) continue;
          fg.emplace_back(x, y);
          if (c.visible.at(x, y)) vis.emplace_back(x, y);
        }
      if (fg.empty())
        throw_numeric("pair " + id + " view " + std::to_string(v + 1) +
                      " has no foreground");
      for (auto [x, y] : pick_pixels(rng, vis, fg, k))
        sources.push_back({v + 1, x, y, c.visible.at(x, y) != 0});
    }
    std::vector<FloatImage> geo1, geo2;
    for (const SourcePixel& s : sources) {
      const RenderedView& sv = views[s.view - 1];
      const GeodesicField field = solver.exact(sv.surface_point(s.x, s.y));
      geo1.push_back(geodesic_map(views[0], field));
      geo2.push_back(geodesic_map(views[1], field));
    }

    write_view(views[0], dir, 1);
    write_view(views[1], dir, 2);
    write_corr(c12, dir, "12");
    write_corr(c21, dir, "21");
    write_pfm((dir / "geo1.pfm").string(), stack(geo1, w, h));
    write_pfm((dir / "geo2.pfm").string(), stack(geo2, w, h));
    {
      std::ofstream out(dir / "sources.txt", std::ios::binary);
      out << "view\tx\ty\tvisible\n";
      for (const SourcePixel& s : sources)
        out << s.view << '\t' << s.x << '\t' << s.y << '\t' << (s.visible ? 1 : 0)
            << '\n';
      if (!out) throw_io("cannot write " + (dir / "sources.txt").string());
    }
    if (config.views == 3) {
      write_view(views[2], dir, 3);
      write_corr(correspondence_field(views[0], views[2]), dir, "13");
    }

    const std::string rel = "pair" + id + "/";
    manifest << id;
    for (size_t c = 1; c < columns.size(); ++c) {
      const std::string& col = columns[c];
      std::string ext = ".pfm";
      if (col.rfind("rgb", 0) == 0 || col.rfind("valid", 0) == 0 ||
          col.rfind("vis", 0) == 0)
        ext = ".png";
      else if (col.rfind("flow", 0) == 0)
        ext = ".flo";
      else if (col == "sources")
        ext = ".txt";
      manifest << '\t' << rel << col << ext;
    }
    manifest << '\n';
  }

  const std::string path = (root / "manifest.tsv").string();
  std::ofstream out(path, std::ios::binary);
  out << manifest.str();
  if (!out) throw_io("cannot write " + path);
  return path;
}

const std::string& Manifest::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw_data("manifest has no '" + key + "' entry");
  return it->second;
}

double Manifest::meta_double(const std::string& key) const {
  const std::string& s = meta_value(key);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw_data("manifest entry '" + key + "' is not a number: " + s);
  return v;
}

int Manifest::meta_int(const std::string& key) const {
  const std::string& s = meta_value(key);
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw_data("manifest entry '" + key + "' is not an integer: " + s);
  return v;
}

bool Manifest::has_column(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

std::string Manifest::path(size_t record, const std::string& column) const {
  auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) throw_data("manifest has no column '" + column + "'");
  return (fs::path(dir) / records.at(record)[it - columns.begin()]).string();
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open manifest " + path);
  Manifest m;
  m.dir = fs::path(path).parent_path().string();
  if (m.dir.empty()) m.dir = ".";
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      m.meta[key] = line.substr(eq + 1);
      continue;
    }
    auto cells = split_tabs(line);
    if (m.columns.empty()) {
      m.columns = std::move(cells);
      continue;
    }
    if (cells.size() != m.columns.size())
      throw_data(path + ":" + std::to_string(lineno) + ": expected " +
                 std::to_string(m.columns.size()) + " fields, found " +
                 std::to_string(cells.size()));
    m.records.push_back(std::move(cells));
  }
  if (m.columns.empty()) throw_data(path + ": missing column header");
  return m;
}

ViewData load_view(const std::string& rgb_png, const std::string& face_pfm) {
  ViewData v;
  v.rgb = to_floats(read_png(rgb_png));
  if (v.rgb.channels != 3) throw_data(rgb_png + ": expected an RGB image");
  const FloatImage face = read_pfm(face_pfm);
  if (!face.same_size(v.rgb) || face.channels != 1)
    throw_data(face_pfm + ": size does not match " + rgb_png);
  v.foreground = Raster<std::uint8_t>(face.width, face.height, 1, 0);
  for (size_t i = 0; i < face.data.size(); ++i)
    v.foreground.data[i] = face.data[i] >= 0.0f ? 1 : 0;
  return v;
}

CorrespondenceField load_correspondence(const std::string& flo,
                                        const std::string& visible_png) {
  const ByteImage vis = read_png(visible_png);
  if (vis.channels != 1) throw_data(visible_png + ": expected a gray mask");
  return flow_to_correspondence(read_flo(flo), vis);
}

std::vector<FloatImage> split_stacked(const FloatImage& stacked, int count) {
  if (count <= 0 || stacked.height % count != 0)
    throw_data("stacked raster height " + std::to_string(stacked.height) +
               " is not a multiple of " + std::to_string(count));
  const int h = stacked.height / count;
  std::vector<FloatImage> out;
  for (int s = 0; s < count; ++s) {
    FloatImage r(stacked.width, h, stacked.channels);
    const long n = static_cast<long>(r.data.size());
    std::copy(stacked.data.begin() + s * n, stacked.data.begin() + (s + 1) * n,
              r.data.begin());
    out.push_back(std::move(r));
  }
  return out;
}

PairData load_pair(const Manifest& m, size_t record) {
  PairData p;
  p.id = m.records.at(record).at(0);
  p.view1 = load_view(m.path(record, "rgb1"), m.path(record, "face1"));
  p.view2 = load_view(m.path(record, "rgb2"), m.path(record, "face2"));
  p.c12 = load_correspondence(m.path(record, "flow12"), m.path(record, "vis12"));
  p.c21 = load_correspondence(m.path(record, "flow21"), m.path(record, "vis21"));
  if (!p.c12.valid.same_size(p.view1.foreground) ||
      !p.c21.valid.same_size(p.view2.foreground))
    throw_data("pair " + p.id + ": correspondence size does not match images");
  {
    const std::string path = m.path(record, "sources");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      SourcePixel s{};
      int vis = 0;
      if (!(row >> s.view >> s.x >> s.y >> vis) || (s.view != 1 && s.view != 2))
        throw_data(path + ": malformed source line '" + line + "'");
      s.visible = vis != 0;
      p.sources.push_back(s);
    }
  }
  const int n = static_cast<int>(p.sources.size());
  p.geo1 = split_stacked(read_pfm(m.path(record, "geo1")), n);
  p.geo2 = split_stacked(read_pfm(m.path(record, "geo2")), n);
  for (const SourcePixel& s : p.sources) {
    const auto& fg = s.view == 1 ? p.view1.foreground : p.view2.foreground;
    if (!fg.inside(s.x, s.y) || !fg.at(s.x, s.y))
      throw_data("pair " + p.id + ": source pixel off the foreground");
  }
  return p;
}

TripleData load_triple(const Manifest& m, size_t record) {
  if (!m.has_column("rgb3")) throw_data("manifest has no third view");
  TripleData t;
  t.view1 = load_view(m.path(record, "rgb1"), m.path(record, "face1"));
  t.view2 = load_view(m.path(record, "rgb2"), m.path(record, "face2"));
  t.view3 = load_view(m.path(record, "rgb3"), m.path(record, "face3"));
  t.c13 = load_correspondence(m.path(record, "flow13"), m.path(record, "vis13"));
  return t;
}

}  // namespace geofeat
