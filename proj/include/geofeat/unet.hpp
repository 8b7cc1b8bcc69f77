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

#ifndef GEOFEAT_UNET_HPP_
#define GEOFEAT_UNET_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "geofeat/rng.hpp"
#include "geofeat/tensor.hpp"

namespace geofeat {

// Residual U-Net with one unit-norm feature head per resolution level.
//
// Level l has plan[l] channels at 1/2^l resolution. Encoder level 0 is a
// stem conv, deeper levels start with a stride-2 conv; each is followed by
// a residual block (two 3x3 convs plus skip). The decoder upsamples, convs
// to the finer width, adds the encoder skip and applies a residual block.
// Every decoder level (and the bottleneck) feeds a 1x1 conv head whose
// output is L2-normalized per pixel.
struct UNetParams {
  std::vector<int> plan;
  int feature_dim = 16;
  std::vector<std::string> names;
  std::vector<Tensor<float>> tensors;

  int levels() const { return static_cast<int>(plan.size()); }
  int index(const std::string& name) const;  // -1 if absent
  const Tensor<float>& get(const std::string& name) const;
  size_t parameter_count() const;
};

// Default toy plan.
inline std::vector<int> default_plan() { return {16, 32, 64}; }

UNetParams init_params(Rng& rng, const std::vector<int>& plan, int feature_dim = 16);

// Throws a usage error unless H and W are divisible by 2^(levels-1).
void check_input_size(const UNetParams& params, int height, int width);

namespace detail {
inline std::string pname(const char* prefix, int level, const char* what) {
  return std::string(prefix) + std::to_string(level) + "." + what;
}
}  // namespace detail

// Builds the network on a graph. vars[i] holds params.tensors[i] (any
// scalar type). image is [N, H, W, 3]. Returns maps ordered coarse to fine.
template <typename S>
std::vector<Var> unet_forward(Graph<S>& g, const UNetParams& params,
                              const std::vector<Var>& vars, Var image) {
  const auto& shp = g.shape(image);
  if (shp.size() != 4 || shp[3] != 3)
    throw_usage("unet input must be [N, H, W, 3], got " + shape_string(shp));
  check_input_size(params, shp[1], shp[2]);
  auto var = [&](const std::string& name) {
    const int i = params.index(name);
    if (i < 0) throw_data("missing network parameter " + name);
    return vars.at(static_cast<size_t>(i));
  };
  auto conv = [&](Var x, const std::string& base, int stride) {
    const Var w = var(base + ".w");
    const int k = g.shape(w)[1];
    return conv2d(g, x, w, var(base + ".b"), stride, k / 2);
  };
  auto resblock = [&](Var x, const std::string& base) {
    Var r = relu(g, conv(x, base + ".res1", 1));
    r = conv(r, base + ".res2", 1);
    return relu(g, add(g, x, r));
  };

  const int levels = params.levels();
  std::vector<Var> enc(levels);
  Var x = image;
  for (int l = 0; l < levels; ++l) {
    const std::string base = "enc" + std::to_string(l);
    x = relu(g, conv(x, base + ".down", l == 0 ? 1 : 2));
    x = resblock(x, base);
    enc[l] = x;
  }
  std::vector<Var> dec(levels);
  dec[levels - 1] = enc[levels - 1];
  for (int l = levels - 2; l >= 0; --l) {
    const std::string base = "dec" + std::to_string(l);
    Var u = bilinear_upsample(g, dec[l + 1]);
    u = relu(g, conv(u, base + ".up", 1));
    dec[l] = resblock(add(g, u, enc[l]), base);
  }
  std::vector<Var> out;
  for (int l = levels - 1; l >= 0; --l)
    out.push_back(l2_normalize_channels(
        g, conv(dec[l], "head" + std::to_string(l), 1), static_cast<S>(1e-8)));
  return out;
}

// Registers all parameters as graph leaves.
template <typename S>
std::vector<Var> add_params(Graph<S>& g, const UNetParams& params, bool requires_grad = true) {
  std::vector<Var> vars;
  vars.reserve(params.tensors.size());
  for (const auto& t : params.tensors) vars.push_back(g.leaf(t.cast<S>(), requires_grad));
  return vars;
}

// Inference only. image is [H, W, 3] or [N, H, W, 3]; returns coarse to fine.
std::vector<Tensor<float>> unet_extract(const UNetParams& params, const Tensor<float>& image);

struct AdamState {
  std::int64_t step = 0;
  std::vector<Tensor<float>> m, v;
};

struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Bias-corrected ADAM update in place. Moments are allocated on first use.
void adam_step(std::vector<Tensor<float>>& params, const std::vector<Tensor<float>>& grads,
               AdamState& state, const AdamConfig& cfg);

// Checkpoint: "GPSW", u32 version, u32 count, then per tensor u32 name
// length, name, u32 rank, u32 dims, f32 payload. Little-endian.
constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const std::string& path, const std::vector<std::string>& names,
                     const std::vector<Tensor<float>>& tensors);
void load_checkpoint(const std::string& path, std::vector<std::string>& names,
                     std::vector<Tensor<float>>& tensors);
void save_params(const std::string& path, const UNetParams& params);
// Recovers the channel plan from the tensor shapes.
UNetParams load_params(const std::string& path);

}  // namespace geofeat

#endif  // GEOFEAT_UNET_HPP_
