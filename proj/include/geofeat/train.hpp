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

#ifndef GEOFEAT_TRAIN_HPP_
#define GEOFEAT_TRAIN_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "geofeat/config.hpp"
#include "geofeat/dataset.hpp"
#include "geofeat/gps_loss.hpp"
#include "geofeat/matchkit.hpp"
#include "geofeat/unet.hpp"

namespace geofeat {

struct TrainConfig {
  std::uint64_t seed = 0;
  int steps = 1000;
  int batch = 4;  // pairs per step; both views of each pair enter the batch
  double lr = 1e-4;
  double lr_decay = 0.7;
  int lr_decay_every = 0;  // 0: steps / 8
  LossSelection loss = LossSelection::parse("full");
  LossWeights weights;
  int triplets = 512;   // ordinal triplets per step, per level
  int dense_refs = 1;   // dense reference pixels per image
  int cross_refs = 1;   // cross-view references per pair
  double margin = 0.2;
  double neg_radius = 8.0;  // pixels
  std::vector<int> plan = default_plan();
  int feature_dim = 16;
  int val_every = 0;  // 0: steps / 10
  int val_pairs = 4;

  static TrainConfig from_config(const Config& c);
  // Fully resolved settings (defaults filled in).
  Config to_config() const;
  int decay_every() const { return lr_decay_every > 0 ? lr_decay_every : std::max(1, steps / 8); }
  int validation_every() const { return val_every > 0 ? val_every : std::max(1, steps / 10); }
};

struct TrainReport {
  std::vector<double> losses;                  // one per step
  std::vector<std::pair<int, double>> val_aepe;  // (step, AEPE non-occluded)
  UNetParams params;
  long skipped_ties = 0;
};

// Trains from the seeded initialization. Writes "step\tloss\tval_aepe" lines
// to log when given. val may be null (no validation column values).
TrainReport train(const Manifest& train_set, const Manifest* val_set, const TrainConfig& cfg,
                  std::ostream* log = nullptr);

// Parameters train() starts from.
UNetParams initial_params(const TrainConfig& cfg);

// Network input: rgb in [0,1] shifted to [-0.5, 0.5], [H, W, 3].
Tensor<float> network_input(const FloatImage& rgb);

// Finest-level features of one image.
FeatureMap extract_features(const UNetParams& params, const FloatImage& rgb);

struct EvalRow {
  std::string id;
  double aepe_non = 0, aepe_all = 0;
  double occlusion_ap = 0;       // NaN without occluded pixels
  double dnn_occluded = 0, dnn_visible = 0;
  double cycle_cascade = 0, cycle_direct = 0;  // NaN without a third view
};

struct EvalTable {
  std::vector<EvalRow> rows;
  EvalRow mean;  // over finite entries of each column
  std::string tsv() const;
};

// Matches every record with the given features; with gt_oracle the ground
// truth field stands in for the prediction (d_nn = 0 on visible pixels,
// 1 elsewhere).
EvalTable evaluate(const UNetParams* params, const Manifest& manifest, bool gt_oracle = false,
                   size_t max_pairs = 0);

}  // namespace geofeat

#endif  // GEOFEAT_TRAIN_HPP_
