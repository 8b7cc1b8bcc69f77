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

#ifndef GEOFEAT_TESTS_GRAD_CHECK_HPP_
#define GEOFEAT_TESTS_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "geofeat/rng.hpp"
#include "geofeat/tensor.hpp"

namespace geofeat::testing {

using Build = std::function<Var(Graph<double>&, const std::vector<Var>&)>;

inline Tensor<double> random_tensor(Rng& rng, std::vector<int> shape, double lo = -1,
                                    double hi = 1) {
  Tensor<double> t(std::move(shape));
  for (double& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

// Keeps values away from zero so relu kinks are not crossed by the probe.
inline Tensor<double> away_from_zero(Rng& rng, std::vector<int> shape) {
  Tensor<double> t = random_tensor(rng, std::move(shape));
  for (double& x : t.data) x = (x < 0 ? -0.05 : 0.05) + x;
  return t;
}

// Scalarizes op output with fixed random weights so every output element
// contributes its own direction.
inline Var scalarize(Graph<double>& g, Var out, Rng& rng) {
  Tensor<double> w = random_tensor(rng, g.shape(out));
  return reduce_sum(g, mul(g, out, g.constant(std::move(w))));
}

inline double evaluate(const Build& build, const std::vector<Tensor<double>>& inputs,
                       std::uint64_t wseed) {
  Graph<double> g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.leaf(t));
  Rng wr(wseed);
  return g.value(scalarize(g, build(g, vars), wr))[0];
}

// Max relative error between analytic and central-difference gradients on
// `probes` random elements of every input.
inline double grad_check(const Build& build, const std::vector<Tensor<double>>& inputs,
                         Rng& rng, int probes = 5, double eps = 1e-3) {
  const std::uint64_t wseed = rng.next_u64();
  Graph<double> g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.leaf(t));
  Rng wr(wseed);
  const Var loss = scalarize(g, build(g, vars), wr);
  g.backward(loss);
  double worst = 0.0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    const Tensor<double> analytic = g.grad(vars[k]);
    for (int p = 0; p < probes; ++p) {
      const size_t i = rng.below(inputs[k].size());
      auto plus = inputs, minus = inputs;
      plus[k][i] += eps;
      minus[k][i] -= eps;
      const double numeric =
          (evaluate(build, plus, wseed) - evaluate(build, minus, wseed)) / (2 * eps);
      const double a = analytic[i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-4});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
  }
  return worst;
}

inline void check_op(const char* name,
                     const std::function<std::vector<Tensor<double>>(Rng&)>& make,
                     const Build& build, double eps = 1e-3) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed, name);
    const auto inputs = make(rng);
    const double err = grad_check(build, inputs, rng, 5, eps);
    INFO(name << " seed " << seed);
    CHECK(err < 1e-3);
  }
}

}  // namespace geofeat::testing

#endif  // GEOFEAT_TESTS_GRAD_CHECK_HPP_
