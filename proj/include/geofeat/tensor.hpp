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

#ifndef GEOFEAT_TENSOR_HPP_
#define GEOFEAT_TENSOR_HPP_

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "geofeat/error.hpp"

namespace geofeat {

// Dense row-major tensor of up to 4 dims. Images and feature maps use
// (batch, height, width, channels).
// Buffers are aligned to the widest vector unit. Eigen's reductions pick
// their summation order from the start address, so a fixed alignment is
// what keeps results identical from run to run.
template <typename S>
using AlignedVector = std::vector<S, Eigen::aligned_allocator<S>>;

template <typename S>
struct Tensor {
  std::vector<int> shape;
  AlignedVector<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, S fill = S(0))
      : shape(std::move(dims)), data(count(shape), fill) {}

  static size_t count(const std::vector<int>& dims) {
    size_t n = 1;
    for (int d : dims) n *= static_cast<size_t>(d);
    return n;
  }
  size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  bool empty() const { return data.empty(); }
  S& operator[](size_t i) { return data[i]; }
  const S& operator[](size_t i) const { return data[i]; }
  // NHWC element access.
  S& at(int n, int y, int x, int c) {
    return data[((static_cast<size_t>(n) * shape[1] + y) * shape[2] + x) * shape[3] + c];
  }
  const S& at(int n, int y, int x, int c) const {
    return data[((static_cast<size_t>(n) * shape[1] + y) * shape[2] + x) * shape[3] + c];
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }
};

inline std::string shape_string(const std::vector<int>& shape);

struct Var {
  int id = -1;
};

// Tape of operations in creation order (which is a topological order).
// Every op checks that its output is finite.
template <typename S>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  Var leaf(Tensor<S> value, bool requires_grad = true) {
    return push(std::move(value), requires_grad, nullptr, "leaf");
  }
  Var constant(Tensor<S> value) { return leaf(std::move(value), false); }

  const Tensor<S>& value(Var v) const { return nodes_.at(v.id).value; }
  const std::vector<int>& shape(Var v) const { return value(v).shape; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  // Gradient after backward(); zeros for leaves not on a path to the loss.
  Tensor<S> grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.empty()) return Tensor<S>(n.value.shape);
    return n.grad;
  }

  void backward(Var loss) {
    const Node& root = nodes_.at(loss.id);
    if (root.value.size() != 1)
      throw_usage("backward needs a scalar loss, got shape " +
                  shape_string(root.value.shape));
    for (Node& n : nodes_) n.grad = Tensor<S>();
    nodes_[loss.id].grad = Tensor<S>(root.value.shape, S(1));
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(*this, i);
    }
  }

  // Op plumbing.
  Var push(Tensor<S> value, bool requires_grad, BackwardFn fn, const char* op) {
    for (const S& x : value.data)
      if (!std::isfinite(x))
        throw_numeric(std::string("non-finite value produced by ") + op);
    nodes_.push_back(Node{std::move(value), Tensor<S>(), requires_grad,
                          requires_grad ? std::move(fn) : nullptr, op});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }
  bool any_grad(std::initializer_list<Var> vs) const {
    for (Var v : vs)
      if (nodes_.at(v.id).requires_grad) return true;
    return false;
  }
  const Tensor<S>& out_grad(int self) const { return nodes_[self].grad; }
  // Gradient accumulator of an input, allocated on first use; nullptr when
  // the input does not need a gradient.
  Tensor<S>* acc(Var v) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad = Tensor<S>(n.value.shape);
    return &n.grad;
  }
  int size() const { return static_cast<int>(nodes_.size()); }
  const char* op_name(Var v) const { return nodes_.at(v.id).op; }

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    bool requires_grad;
    BackwardFn backward;
    const char* op;
  };
  std::vector<Node> nodes_;
};

namespace detail {
template <typename S>
using MatR = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapR = Eigen::Map<MatR<S>>;
template <typename S>
using CMapR = Eigen::Map<const MatR<S>>;

inline void require(bool ok, const std::string& what) {
  if (!ok) throw_usage(what);
}
}  // namespace detail

inline std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i)
    s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

// ---------------------------------------------------------------------------
// Elementwise.

template <typename S>
Var add(Graph<S>& g, Var a, Var b) {
  detail::require(g.shape(a) == g.shape(b), "add: shape mismatch " +
                  shape_string(g.shape(a)) + " vs " + shape_string(g.shape(b)));
  Tensor<S> out = g.value(a);
  const auto& bv = g.value(b).data;
  for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return g.push(std::move(out), g.any_grad({a, b}), [a, b](Graph<S>& g, int self) {
    const Tensor<S>& go = g.out_grad(self);
    for (Var v : {a, b})
      if (Tensor<S>* t = g.acc(v))
        for (size_t i = 0; i < go.size(); ++i) (*t)[i] += go[i];
  }, "add");
}

template <typename S>
Var sub(Graph<S>& g, Var a, Var b) {
  detail::require(g.shape(a) == g.shape(b), "sub: shape mismatch " +
                  shape_string(g.shape(a)) + " vs " + shape_string(g.shape(b)));
  Tensor<S> out = g.value(a);
  const auto& bv = g.value(b).data;
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return g.push(std::move(out), g.any_grad({a, b}), [a, b](Graph<S>& g, int self) {
    const Tensor<S>& go = g.out_grad(self);
    if (Tensor<S>* t = g.acc(a))
      for (size_t i = 0; i < go.size(); ++i) (*t)[i] += go[i];
    if (Tensor<S>* t = g.acc(b))
      for (size_t i = 0; i < go.size(); ++i) (*t)[i] -= go[i];
  }, "sub");
}

template <typename S>
Var mul(Graph<S>& g, Var a, Var b) {
  detail::require(g.shape(a) == g.shape(b), "mul: shape mismatch " +
                  shape_string(g.shape(a)) + " vs " + shape_string(g.shape(b)));
  Tensor<S> out = g.value(a);
  const auto& bv = g.value(b).data;
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return g.push(std::move(out), g.any_grad({a, b}), [a, b](Graph<S>& g, int self) {
    const Tensor<S>& go = g.out_grad(self);
    const auto& av = g.value(a).data;
    const auto& bv = g.value(b).data;
    if (Tensor<S>* t = g.acc(a))
      for (size_t i = 0; i < go.size(); ++i) (*t)[i] += go[i] * bv[i];
    if (Tensor<S>* t = g.acc(b))
      for (size_t i = 0; i < go.size(); ++i) (*t)[i] += go[i] * av[i];
  }, "mul");
}

// s * a + c
template <typename S>
Var affine(Graph<S>& g, Var a, S s, S c = S(0)) {
  Tensor<S> out = g.value(a);
  for (S& x : out.data) x = s * x + c;
  return g.push(std::move(out), g.any_grad({a}), [a, s](Graph<S>& g, int self) {
    const Tensor<S>& go = g.out_grad(self);
    if (Tensor<S>* t = g.acc(a))
      for (size_t i = 0; i < go.size(); ++i) (*t)[i] += s * go[i];
  }, "affine");
}

template <typename S>
Var relu(Graph<S>& g, Var a) {
  Tensor<S> out = g.value(a);
  for (S& x : out.data) x = x > S(0) ? x : S(0);
  return g.push(std::move(out), g.any_grad({a}), [a](Graph<S>& g, int self) {
    const Tensor<S>& go = g.out_grad(self);
    const auto& av = g.value(a).data;
    if (Tensor<S>* t = g.acc(a)) {
      S* d = t->data.data();
      for (size_t i = 0; i < go.size(); ++i) d[i] += av[i] > S(0) ? go[i] : S(0);
    }
  }, "relu");
}

// log(1 + exp(x)), evaluated stably.
template <typename S>
S softplus_value(S x) {
  return std::max(x, S(0)) + std::log1p(std::exp(-std::fabs(x)));
}

template <typename S>
Var softplus(Graph<S>& g, Var a) {
  Tensor<S> out = g.value(a);
  for (S& x : out.data) x = softplus_value(x);
  return g.push(std::move(out), g.any_grad({a}), [a](Graph<S>& g, int self) {
    const Tensor<S>& go = g.out_grad(self);
    const auto& av = g.value(a).data;
    if (Tensor<S>* t = g.acc(a))
      for (size_t i = 0; i < go.size(); ++i) {
        const S x = av[i];
        const S sig = x >= 0 ? S(1) / (S(1) + std::exp(-x))
                             : std::exp(x) / (S(1) + std::exp(x));
        (*t)[i] += go[i] * sig;
      }
  }, "softplus");
}

// Hinge max(0, x).
template <typename S>
Var hinge(Graph<S>& g, Var a) {
  return relu(g, a);
}

// ---------------------------------------------------------------------------
// Reductions and matrix ops.

template <typename S>
Var reduce_sum(Graph<S>& g, Var a) {
  const auto& av = g.value(a).data;
  S sum = S(0);
  for (const S& x : av) sum += x;
  Tensor<S> out({1}, sum);
  return g.push(std::move(out), g.any_grad({a}), [a](Graph<S>& g, int self) {
    const S go = g.out_grad(self)[0];
    if (Tensor<S>* t = g.acc(a))
      for (S& x : t->data) x += go;
  }, "reduce_sum");
}

template <typename S>
Var mean(Graph<S>& g, Var a) {
  const size_t n = g.value(a).size();
  detail::require(n > 0, "mean of an empty tensor");
  return affine(g, reduce_sum(g, a), S(1) / static_cast<S>(n));
}

// Sum over the last axis: [M, C] -> [M].
template <typename S>
Var sum_last(Graph<S>& g, Var a) {
  const Tensor<S>& av = g.value(a);
  detail::require(av.rank() >= 1, "sum_last needs rank >= 1");
  const int c = av.shape.back();
  std::vector<int> shape(av.shape.begin(), av.shape.end() - 1);
  if (shape.empty()) shape = {1};
  Tensor<S> out(shape);
  for (size_t m = 0; m < out.size(); ++m) {
    S s = S(0);
    for (int k = 0; k < c; ++k) s += av[m * c + k];
    out[m] = s;
  }
  return g.push(std::move(out), g.any_grad({a}), [a, c](Graph<S>& g, int self) {
    const Tensor<S>& go = g.out_grad(self);
    if (Tensor<S>* t = g.acc(a))
      for (size_t m = 0; m < go.size(); ++m)
        for (int k = 0; k < c; ++k) (*t)[m * c + k] += go[m];
  }, "sum_last");
}

// Row-wise dot product of two [M, C] matrices -> [M].
template <typename S>
Var row_dot(Graph<S>& g, Var a, Var b) {
  return sum_last(g, mul(g, a, b));
}

// [M, K] x [K, N] -> [M, N]; with transpose_b, b is [N, K].
template <typename S>
Var matmul(Graph<S>& g, Var a, Var b, bool transpose_b = false) {
  const Tensor<S>& av = g.value(a);
  const Tensor<S>& bv = g.value(b);
  detail::require(av.rank() == 2 && bv.rank() == 2, "matmul needs matrices");
  const int m = av.dim(0), k = av.dim(1);
  const int bk = transpose_b ? bv.dim(1) : bv.dim(0);
  const int n = transpose_b ? bv.dim(0) : bv.dim(1);
  detail::require(k == bk, "matmul: inner dimensions differ " +
                  shape_string(av.shape) + " x " + shape_string(bv.shape));
  Tensor<S> out({m, n});
  detail::CMapR<S> A(av.data.data(), m, k);
  detail::CMapR<S> B(bv.data.data(), bv.dim(0), bv.dim(1));
  detail::MapR<S> C(out.data.data(), m, n);
  if (transpose_b) C.noalias() = A * B.transpose();
  else C.noalias() = A * B;
  return g.push(std::move(out), g.any_grad({a, b}),
                [a, b, m, k, n, transpose_b](Graph<S>& g, int self) {
    const Tensor<S>& go = g.out_grad(self);
    detail::CMapR<S> G(go.data.data(), m, n);
    const Tensor<S>& av = g.value(a);
    const Tensor<S>& bv = g.value(b);
    detail::CMapR<S> A(av.data.data(), m, k);
    detail::CMapR<S> B(bv.data.data(), bv.dim(0), bv.dim(1));
    if (Tensor<S>* t = g.acc(a)) {
      detail::MapR<S> dA(t->data.data(), m, k);
      if (transpose_b) dA.noalias() += G * B;
      else dA.noalias() += G * B.transpose();
    }
    if (Tensor<S>* t = g.acc(b)) {
      detail::MapR<S> dB(t->data.data(), bv.dim(0), bv.dim(1));
      if (transpose_b) dB.noalias() += G.transpose() * A;
      else dB.noalias() += A.transpose() * G;
    }
  }, "matmul");
}

// ---------------------------------------------------------------------------
// Feature-map ops.

// Divides each vector along the last axis by max(norm, eps).
template <typename S>
Var l2_normalize_channels(Graph<S>& g, Var a, S eps = S(1e-8)) {
  const Tensor<S>& av = g.value(a);
  const int c = av.shape.back();
  const size_t rows = av.size() / c;
  Tensor<S> out = av;
  std::vector<S> denom(rows);
  for (size_t r = 0; r < rows; ++r) {
    S ss = S(0);
    for (int k = 0; k < c; ++k) ss += av[r * c + k] * av[r * c + k];
    denom[r] = std::max(std::sqrt(ss), eps);
    for (int k = 0; k < c; ++k) out[r * c + k] /= denom[r];
  }
  return g.push(std::move(out), g.any_grad({a}),
                [a, c, rows, eps, denom = std::move(denom)](Graph<S>& g, int self) {
    const Tensor<S>& go = g.out_grad(self);
    const Tensor<S>& av = g.value(a);
    Tensor<S>* t = g.acc(a);
    if (!t) return;
    for (size_t r = 0; r < rows; ++r) {
      const S d = denom[r];
      if (d <= eps) {  // clamped: output = x / eps
        for (int k = 0; k < c; ++k) (*t)[r * c + k] += go[r * c + k] / eps;
        continue;
      }
      // d/dx (x/|x|) = (I - y y^T) / |x|
      S dot = S(0);
      for (int k = 0; k < c; ++k) dot += go[r * c + k] * av[r * c + k] / d;
      for (int k = 0; k < c; ++k)
        (*t)[r * c + k] += (go[r * c + k] - dot * av[r * c + k] / d) / d;
    }
  }, "l2_normalize_channels");
}

// One output row as a weighted sum of pixel feature vectors.
template <typename S>
struct PixelTap {
  int n, y, x;
  S weight;
};

template <typename S>
struct GatherSpec {
  std::vector<int> row_begin{0};  // taps of row r: [row_begin[r], row_begin[r+1])
  std::vector<PixelTap<S>> taps;

  int rows() const { return static_cast<int>(row_begin.size()) - 1; }
  void add_tap(int n, int y, int x, S w) { taps.push_back({n, y, x, w}); }
  void end_row() { row_begin.push_back(static_cast<int>(taps.size())); }
  // Nearest pixel.
  void add_pixel(int n, int y, int x) {
    add_tap(n, y, x, S(1));
    end_row();
  }
  // Bilinear sample at sub-pixel (x, y), clamped to the image.
  void add_bilinear(int n, double x, double y, int height, int width) {
    x = std::clamp(x, 0.0, width - 1.0);
    y = std::clamp(y, 0.0, height - 1.0);
    const int x0 = std::min(static_cast<int>(x), width - 1);
    const int y0 = std::min(static_cast<int>(y), height - 1);
    const int x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
    const double fx = x - x0, fy = y - y0;
    add_tap(n, y0, x0, static_cast<S>((1 - fx) * (1 - fy)));
    add_tap(n, y0, x1, static_cast<S>(fx * (1 - fy)));
    add_tap(n, y1, x0, static_cast<S>((1 - fx) * fy));
    add_tap(n, y1, x1, static_cast<S>(fx * fy));
    end_row();
  }
};

// [N, H, W, C] feature map -> [rows, C].
template <typename S>
Var gather_pixels(Graph<S>& g, Var fmap, GatherSpec<S> spec) {
  const Tensor<S>& fv = g.value(fmap);
  detail::require(fv.rank() == 4, "gather_pixels needs an NHWC map");
  const int c = fv.dim(3);
  for (const auto& t : spec.taps)
    detail::require(t.n >= 0 && t.n < fv.dim(0) && t.y >= 0 && t.y < fv.dim(1) &&
                        t.x >= 0 && t.x < fv.dim(2),
                    "gather_pixels: pixel out of range");
  Tensor<S> out({spec.rows(), c});
  for (int r = 0; r < spec.rows(); ++r)
    for (int i = spec.row_begin[r]; i < spec.row_begin[r + 1]; ++i) {
      const auto& t = spec.taps[i];
      const S* src = &fv.at(t.n, t.y, t.x, 0);
      for (int k = 0; k < c; ++k) out[static_cast<size_t>(r) * c + k] += t.weight * src[k];
    }
  return g.push(std::move(out), g.any_grad({fmap}),
                [fmap, c, spec = std::move(spec)](Graph<S>& g, int self) {
    const Tensor<S>& go = g.out_grad(self);
    Tensor<S>* t = g.acc(fmap);
    if (!t) return;
    for (int r = 0; r < spec.rows(); ++r)
      for (int i = spec.row_begin[r]; i < spec.row_begin[r + 1]; ++i) {
        const auto& tap = spec.taps[i];
        S* dst = &t->at(tap.n, tap.y, tap.x, 0);
        for (int k = 0; k < c; ++k) dst[k] += tap.weight * go[static_cast<size_t>(r) * c + k];
      }
  }, "gather_pixels");
}

namespace detail {

struct ConvGeom {
  int n, h, w, cin, cout, k, stride, pad, ho, wo;
  int kdim() const { return k * k * cin; }
  size_t rows() const { return static_cast<size_t>(n) * ho * wo; }
};

template <typename S>
void im2col(const ConvGeom& q, const S* x, S* col) {
  const int kd = q.kdim();
  for (int n = 0; n < q.n; ++n)
    for (int oy = 0; oy < q.ho; ++oy)
      for (int ox = 0; ox < q.wo; ++ox) {
        S* row = col + ((static_cast<size_t>(n) * q.ho + oy) * q.wo + ox) * kd;
        for (int ky = 0; ky < q.k; ++ky) {
          const int iy = oy * q.stride - q.pad + ky;
          for (int kx = 0; kx < q.k; ++kx) {
            const int ix = ox * q.stride - q.pad + kx;
            S* dst = row + (ky * q.k + kx) * q.cin;
            if (iy < 0 || iy >= q.h || ix < 0 || ix >= q.w) {
              std::fill(dst, dst + q.cin, S(0));
            } else {
              const S* src = x + ((static_cast<size_t>(n) * q.h + iy) * q.w + ix) * q.cin;
              std::memcpy(dst, src, sizeof(S) * q.cin);
            }
          }
        }
      }
}

template <typename S>
void col2im_add(const ConvGeom& q, const S* col, S* dx) {
  const int kd = q.kdim();
  for (int n = 0; n < q.n; ++n)
    for (int oy = 0; oy < q.ho; ++oy)
      for (int ox = 0; ox < q.wo; ++ox) {
        const S* row = col + ((static_cast<size_t>(n) * q.ho + oy) * q.wo + ox) * kd;
        for (int ky = 0; ky < q.k; ++ky) {
          const int iy = oy * q.stride - q.pad + ky;
          if (iy < 0 || iy >= q.h) continue;
          for (int kx = 0; kx < q.k; ++kx) {
            const int ix = ox * q.stride - q.pad + kx;
            if (ix < 0 || ix >= q.w) continue;
            const S* src = row + (ky * q.k + kx) * q.cin;
            S* dst = dx + ((static_cast<size_t>(n) * q.h + iy) * q.w + ix) * q.cin;
            for (int c = 0; c < q.cin; ++c) dst[c] += src[c];
          }
        }
      }
}

}  // namespace detail

// x: [N, H, W, Cin]; weight: [Cout, k, k, Cin]; bias: [Cout]. Zero padding.
// Patches are unrolled one image at a time into a reused scratch buffer and
// rebuilt in the backward pass instead of being stored.
template <typename S>
Var conv2d(Graph<S>& g, Var x, Var weight, Var bias, int stride, int pad) {
  const Tensor<S>& xv = g.value(x);
  const Tensor<S>& wv = g.value(weight);
  detail::require(xv.rank() == 4 && wv.rank() == 4, "conv2d needs NHWC input and 4-d kernel");
  detail::require(wv.dim(1) == wv.dim(2), "conv2d kernel must be square");
  detail::require(wv.dim(3) == xv.dim(3), "conv2d: kernel expects " +
                  std::to_string(wv.dim(3)) + " channels, input has " +
                  std::to_string(xv.dim(3)));
  detail::require(g.shape(bias) == std::vector<int>{wv.dim(0)}, "conv2d: bias shape");
  detail::require(stride == 1 || stride == 2, "conv2d stride must be 1 or 2");
  detail::ConvGeom q{1, xv.dim(1), xv.dim(2), xv.dim(3), wv.dim(0), wv.dim(1),
                     stride, pad, 0, 0};
  const int batch = xv.dim(0);
  q.ho = (q.h + 2 * pad - q.k) / stride + 1;
  q.wo = (q.w + 2 * pad - q.k) / stride + 1;
  detail::require(q.ho > 0 && q.wo > 0, "conv2d: output would be empty");
  const bool pointwise = q.k == 1 && stride == 1 && pad == 0;
  const size_t in_stride = static_cast<size_t>(q.h) * q.w * q.cin;
  const size_t out_stride = q.rows() * q.cout;
  thread_local AlignedVector<S> scratch;
  if (!pointwise) scratch.resize(q.rows() * q.kdim());
  Tensor<S> out({batch, q.ho, q.wo, q.cout});
  detail::CMapR<S> W(wv.data.data(), q.cout, q.kdim());
  Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>> B(g.value(bias).data.data(), q.cout);
  for (int n = 0; n < batch; ++n) {
    const S* xin = xv.data.data() + n * in_stride;
    if (!pointwise) detail::im2col(q, xin, scratch.data());
    detail::CMapR<S> C(pointwise ? xin : scratch.data(), q.rows(), q.kdim());
    detail::MapR<S> O(out.data.data() + n * out_stride, q.rows(), q.cout);
    O.noalias() = C * W.transpose();
    O.rowwise() += B;
  }
  return g.push(std::move(out), g.any_grad({x, weight, bias}),
                [x, weight, bias, q, batch, pointwise, in_stride, out_stride](Graph<S>& g,
                                                                              int self) {
    const Tensor<S>& go = g.out_grad(self);
    const Tensor<S>& xv = g.value(x);
    detail::CMapR<S> W(g.value(weight).data.data(), q.cout, q.kdim());
    Tensor<S>* dw = g.acc(weight);
    Tensor<S>* db = g.acc(bias);
    Tensor<S>* dx = g.acc(x);
    thread_local AlignedVector<S> cols, dcols;
    if (!pointwise) {
      cols.resize(q.rows() * q.kdim());
      if (dx) dcols.resize(q.rows() * q.kdim());
    }
    for (int n = 0; n < batch; ++n) {
      detail::CMapR<S> G(go.data.data() + n * out_stride, q.rows(), q.cout);
      const S* xin = xv.data.data() + n * in_stride;
      if (dw) {
        if (!pointwise) detail::im2col(q, xin, cols.data());
        detail::CMapR<S> C(pointwise ? xin : cols.data(), q.rows(), q.kdim());
        detail::MapR<S> dW(dw->data.data(), q.cout, q.kdim());
        dW.noalias() += G.transpose() * C;
      }
      if (db) {
        Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>> dB(db->data.data(), q.cout);
        dB += G.colwise().sum();
      }
      if (dx) {
        if (pointwise) {
          detail::MapR<S> dX(dx->data.data() + n * in_stride, q.rows(), q.kdim());
          dX.noalias() += G * W;
        } else {
          detail::MapR<S> dC(dcols.data(), q.rows(), q.kdim());
          dC.noalias() = G * W;
          detail::col2im_add(q, dcols.data(), dx->data.data() + n * in_stride);
        }
      }
    }
  }, "conv2d");
}

// Bilinear x2 upsampling with half-pixel centers and edge clamping.
template <typename S>
Var bilinear_upsample(Graph<S>& g, Var x) {
  const Tensor<S>& xv = g.value(x);
  detail::require(xv.rank() == 4, "bilinear_upsample needs NHWC input");
  const int n = xv.dim(0), h = xv.dim(1), w = xv.dim(2), c = xv.dim(3);
  struct Tap { int i0, i1; S t; };
  auto taps = [](int size_out, int size_in) {
    std::vector<Tap> out(size_out);
    for (int o = 0; o < size_out; ++o) {
      const double src = (o + 0.5) / 2.0 - 0.5;
      const int i0 = static_cast<int>(std::floor(src));
      const double t = src - i0;
      out[o] = {std::clamp(i0, 0, size_in - 1), std::clamp(i0 + 1, 0, size_in - 1),
                static_cast<S>(t)};
    }
    return out;
  };
  const auto ty = taps(2 * h, h), tx = taps(2 * w, w);
  Tensor<S> out({n, 2 * h, 2 * w, c});
  for (int b = 0; b < n; ++b)
    for (int oy = 0; oy < 2 * h; ++oy)
      for (int ox = 0; ox < 2 * w; ++ox) {
        const Tap& a = ty[oy];
        const Tap& e = tx[ox];
        const S w00 = (1 - a.t) * (1 - e.t), w01 = (1 - a.t) * e.t;
        const S w10 = a.t * (1 - e.t), w11 = a.t * e.t;
        const S* p00 = &xv.at(b, a.i0, e.i0, 0);
        const S* p01 = &xv.at(b, a.i0, e.i1, 0);
        const S* p10 = &xv.at(b, a.i1, e.i0, 0);
        const S* p11 = &xv.at(b, a.i1, e.i1, 0);
        S* dst = &out.at(b, oy, ox, 0);
        for (int k = 0; k < c; ++k)
          dst[k] = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
      }
  return g.push(std::move(out), g.any_grad({x}),
                [x, n, h, w, c, ty, tx](Graph<S>& g, int self) {
    const Tensor<S>& go = g.out_grad(self);
    Tensor<S>* t = g.acc(x);
    if (!t) return;
    for (int b = 0; b < n; ++b)
      for (int oy = 0; oy < 2 * h; ++oy)
        for (int ox = 0; ox < 2 * w; ++ox) {
          const Tap& a = ty[oy];
          const Tap& e = tx[ox];
          const S w00 = (1 - a.t) * (1 - e.t), w01 = (1 - a.t) * e.t;
          const S w10 = a.t * (1 - e.t), w11 = a.t * e.t;
          const S* src = &go.at(b, oy, ox, 0);
          S* d00 = &t->at(b, a.i0, e.i0, 0);
          S* d01 = &t->at(b, a.i0, e.i1, 0);
          S* d10 = &t->at(b, a.i1, e.i0, 0);
          S* d11 = &t->at(b, a.i1, e.i1, 0);
          for (int k = 0; k < c; ++k) {
            d00[k] += w00 * src[k];
            d01[k] += w01 * src[k];
            d10[k] += w10 * src[k];
            d11[k] += w11 * src[k];
          }
        }
  }, "bilinear_upsample");
}

}  // namespace geofeat

#endif  // GEOFEAT_TENSOR_HPP_
