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

#include "geofeat/unet.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

namespace geofeat {

int UNetParams::index(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

const Tensor<float>& UNetParams::get(const std::string& name) const {
  const int i = index(name);
  if (i < 0) throw_data("missing network parameter " + name);
  return tensors[static_cast<size_t>(i)];
}

size_t UNetParams::parameter_count() const {
  size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

namespace {

void add_conv(UNetParams& p, Rng& rng, const std::string& base, int cout, int k, int cin) {
  const int fan_in = k * k * cin;
  const double bound = std::sqrt(6.0 / fan_in);
  Tensor<float> w({cout, k, k, cin});
  for (float& x : w.data) x = static_cast<float>(rng.uniform(-bound, bound));
  p.names.push_back(base + ".w");
  p.tensors.push_back(std::move(w));
  p.names.push_back(base + ".b");
  p.tensors.push_back(Tensor<float>({cout}));
}

void validate_plan(const std::vector<int>& plan, int feature_dim) {
  if (plan.empty()) throw_usage("channel plan is empty");
  for (int c : plan)
    if (c <= 0) throw_usage("channel plan entries must be positive");
  if (feature_dim <= 0) throw_usage("feature dimension must be positive");
}

}  // namespace

UNetParams init_params(Rng& rng, const std::vector<int>& plan, int feature_dim) {
  validate_plan(plan, feature_dim);
  UNetParams p;
  p.plan = plan;
  p.feature_dim = feature_dim;
  const int levels = static_cast<int>(plan.size());
  for (int l = 0; l < levels; ++l) {
    const std::string base = "enc" + std::to_string(l);
    add_conv(p, rng, base + ".down", plan[l], 3, l == 0 ? 3 : plan[l - 1]);
    add_conv(p, rng, base + ".res1", plan[l], 3, plan[l]);
    add_conv(p, rng, base + ".res2", plan[l], 3, plan[l]);
  }
  for (int l = levels - 2; l >= 0; --l) {
    const std::string base = "dec" + std::to_string(l);
    add_conv(p, rng, base + ".up", plan[l], 3, plan[l + 1]);
    add_conv(p, rng, base + ".res1", plan[l], 3, plan[l]);
    add_conv(p, rng, base + ".res2", plan[l], 3, plan[l]);
  }
  for (int l = levels - 1; l >= 0; --l)
    add_conv(p, rng, "head" + std::to_string(l), feature_dim, 1, plan[l]);
  return p;
}

void check_input_size(const UNetParams& params, int height, int width) {
  const int div = 1 << (params.levels() - 1);
  if (height <= 0 || width <= 0 || height % div != 0 || width % div != 0)
    throw_usage("input size " + std::to_string(width) + "x" + std::to_string(height) +
                " is not divisible by " + std::to_string(div));
}

std::vector<Tensor<float>> unet_extract(const UNetParams& params, const Tensor<float>& image) {
  Tensor<float> batched = image;
  if (image.rank() == 3) batched.shape.insert(batched.shape.begin(), 1);
  Graph<float> g;
  const auto vars = add_params(g, params, false);
  const Var x = g.constant(std::move(batched));
  std::vector<Tensor<float>> out;
  for (Var v : unet_forward(g, params, vars, x)) {
    Tensor<float> t = g.value(v);
    if (image.rank() == 3) t.shape.erase(t.shape.begin());
    out.push_back(std::move(t));
  }
  return out;
}

void adam_step(std::vector<Tensor<float>>& params, const std::vector<Tensor<float>>& grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size())
    throw_usage("adam: parameter and gradient counts differ");
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i].shape != grads[i].shape)
      throw_usage("adam: gradient shape mismatch for tensor " + std::to_string(i));
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.shape);
      state.v.emplace_back(p.shape);
    }
  }
  if (state.m.size() != params.size()) throw_usage("adam: state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(state.step));
  const float step_size = static_cast<float>(cfg.lr / c1);
  const float inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
  for (size_t i = 0; i < params.size(); ++i) {
    float* p = params[i].data.data();
    const float* g = grads[i].data.data();
    float* m = state.m[i].data.data();
    float* v = state.v[i].data.data();
    for (size_t k = 0; k < params[i].size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0f - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0f - cfg.beta2) * g[k] * g[k];
      p[k] -= step_size * m[k] / (std::sqrt(v[k]) * inv_sqrt_c2 + cfg.eps);
    }
  }
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw_data("truncated checkpoint " + path);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<std::string>& names,
                     const std::vector<Tensor<float>>& tensors) {
  if (names.size() != tensors.size()) throw_usage("checkpoint: name count mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw_io("cannot write " + path);
  os.write("GPSW", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (size_t i = 0; i < tensors.size(); ++i) {
    put_u32(os, static_cast<std::uint32_t>(names[i].size()));
    os.write(names[i].data(), static_cast<std::streamsize>(names[i].size()));
    put_u32(os, static_cast<std::uint32_t>(tensors[i].rank()));
    for (int d : tensors[i].shape) put_u32(os, static_cast<std::uint32_t>(d));
    for (float f : tensors[i].data) put_u32(os, std::bit_cast<std::uint32_t>(f));
  }
  if (!os) throw_io("write failed for " + path);
}

void load_checkpoint(const std::string& path, std::vector<std::string>& names,
                     std::vector<Tensor<float>>& tensors) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw_io("cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "GPSW")
    throw_data(path + " is not a checkpoint (bad magic)");
  const std::uint32_t version = get_u32(is, path);
  if (version != kCheckpointVersion)
    throw_data("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = get_u32(is, path);
  names.clear();
  tensors.clear();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(is, path);
    if (len > 4096) throw_data("corrupt checkpoint name length in " + path);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw_data("truncated checkpoint " + path);
    const std::uint32_t rank = get_u32(is, path);
    if (rank > 4) throw_data("checkpoint tensor rank above 4 in " + path);
    std::vector<int> shape(rank);
    size_t n = 1;
    for (auto& d : shape) {
      const std::uint32_t v = get_u32(is, path);
      if (v == 0 || v > (1u << 24)) throw_data("corrupt checkpoint dims in " + path);
      d = static_cast<int>(v);
      n *= v;
    }
    if (n > (size_t{1} << 28)) throw_data("checkpoint tensor too large in " + path);
    Tensor<float> t(shape);
    for (float& f : t.data) f = std::bit_cast<float>(get_u32(is, path));
    names.push_back(std::move(name));
    tensors.push_back(std::move(t));
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw_data("trailing bytes after checkpoint payload in " + path);
}

void save_params(const std::string& path, const UNetParams& params) {
  save_checkpoint(path, params.names, params.tensors);
}

UNetParams load_params(const std::string& path) {
  UNetParams p;
  load_checkpoint(path, p.names, p.tensors);
  for (int l = 0;; ++l) {
    const int i = p.index("enc" + std::to_string(l) + ".down.w");
    if (i < 0) break;
    p.plan.push_back(p.tensors[static_cast<size_t>(i)].dim(0));
  }
  if (p.plan.empty()) throw_data(path + " holds no encoder weights");
  p.feature_dim = p.get("head0.w").dim(0);
  // The reconstructed layout must match a freshly initialized one.
  Rng rng(0);
  const UNetParams ref = init_params(rng, p.plan, p.feature_dim);
  for (size_t i = 0; i < ref.names.size(); ++i) {
    const int j = p.index(ref.names[i]);
    if (j < 0 || p.tensors[static_cast<size_t>(j)].shape != ref.tensors[i].shape)
      throw_data("checkpoint tensor " + ref.names[i] + " missing or misshapen");
  }
  if (ref.names.size() != p.names.size()) throw_data("checkpoint has extra tensors");
  return p;
}

}  // namespace geofeat
