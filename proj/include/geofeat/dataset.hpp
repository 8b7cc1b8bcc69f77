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

#ifndef GEOFEAT_DATASET_HPP_
#define GEOFEAT_DATASET_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "geofeat/config.hpp"
#include "geofeat/image_io.hpp"
#include "geofeat/synth.hpp"

namespace geofeat {

struct DatasetConfig {
  int pairs = 8;
  std::uint64_t seed = 0;
  std::uint64_t model_seed = 0;  // subject identity, shared by train/test sets
  int views = 2;                 // 3 adds a third view for cycle evaluation
  int limbs = 5;
  int segments = 2;
  double joint_limit_deg = 60.0;
  int sources_per_view = 4;
  CameraRig rig;

  // Reads the keys below from `config` when present, leaving defaults
  // otherwise: pairs, seed, model_seed, views, limbs, segments,
  // joint_limit_deg, sources_per_view, width, height, focal, min_distance,
  // max_distance, max_angle_deg, max_elevation_deg.
  static DatasetConfig from_config(const Config& config);
  // The same keys with every value filled in.
  Config to_config() const;
};

// The subject a dataset config renders.
inline ArticulatedModel dataset_model(const DatasetConfig& config) {
  return build_toy_humanoid(config.model_seed, config.limbs, config.segments);
}

// Views of record `index` exactly as generate_dataset renders them. The
// second overload continues on `rng`, which the generator then uses to pick
// source pixels.
std::vector<RenderedView> render_record(const ArticulatedModel& model,
                                       const DatasetConfig& config, int index);
std::vector<RenderedView> render_record(const ArticulatedModel& model,
                                       const DatasetConfig& config, int index,
                                       Rng& rng);

// Writes `out_dir`/manifest.tsv plus one directory per pair and returns the
// manifest path. The manifest starts with "# key=value" metadata lines, then
// a tab-separated column header, then one record per pair with paths
// relative to the manifest directory.
std::string generate_dataset(const DatasetConfig& config,
                             const std::string& out_dir);

struct SourcePixel {
  int view;  // 1 or 2
  int x, y;
  bool visible;  // visible in the other view
};

struct Manifest {
  std::string dir;  // directory holding the manifest
  std::map<std::string, std::string> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> records;

  const std::string& meta_value(const std::string& key) const;
  double meta_double(const std::string& key) const;
  int meta_int(const std::string& key) const;
  bool has_column(const std::string& name) const;
  // Absolute (manifest-relative resolved) path of a column in a record.
  std::string path(size_t record, const std::string& column) const;
  size_t size() const { return records.size(); }
};

Manifest load_manifest(const std::string& path);

// One view's rasters as stored on disk.
struct ViewData {
  FloatImage rgb;                   // 3 channels in [0,1]
  Raster<std::uint8_t> foreground;  // from the face raster
};

struct PairData {
  std::string id;
  ViewData view1, view2;
  CorrespondenceField c12, c21;
  // Stacked geodesic rasters in meters: raster s evaluates source s on the
  // view; NaN on background.
  std::vector<FloatImage> geo1, geo2;
  std::vector<SourcePixel> sources;
};

PairData load_pair(const Manifest& manifest, size_t record);

struct TripleData {
  ViewData view1, view2, view3;
  CorrespondenceField c13;  // ground truth for the cascade 1 -> 2 -> 3
};

TripleData load_triple(const Manifest& manifest, size_t record);

ViewData load_view(const std::string& rgb_png, const std::string& face_pfm);
CorrespondenceField load_correspondence(const std::string& flo,
                                        const std::string& visible_png);

// Splits a stacked PFM (height = count * view height) into `count` rasters.
std::vector<FloatImage> split_stacked(const FloatImage& stacked, int count);

}  // namespace geofeat

#endif  // GEOFEAT_DATASET_HPP_
