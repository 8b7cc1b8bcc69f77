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

#ifndef GEOFEAT_RNG_HPP_
#define GEOFEAT_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace geofeat {

// Splittable seeding: every consumer of randomness derives its own engine
// from (run seed, stream label). Streams never share state, so adding a new
// consumer does not perturb existing ones.
//
//   stream_seed = splitmix64(seed ^ fnv1a64(label))
//
// and the engine is std::mt19937_64 seeded with stream_seed.

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : tag_(splitmix64(seed)), engine_(tag_) {}
  Rng(std::uint64_t seed, std::string_view label)
      : tag_(splitmix64(seed ^ fnv1a64(label))), engine_(tag_) {}

  // Child stream; does not advance this generator.
  Rng split(std::string_view label) const { return Rng(tag_, label); }

  // Uniform in [0, 1). Built from the top 53 bits so the value sequence is
  // identical across standard libraries.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::uint64_t tag_;
  std::mt19937_64 engine_;
};

}  // namespace geofeat

#endif  // GEOFEAT_RNG_HPP_
