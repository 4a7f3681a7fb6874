// Copyright 2026 The otdro Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "otdro/types.hpp"

namespace otdro {

/// Deterministic 64-bit generator (xoshiro256**, seeded through SplitMix64).
///
/// All randomness in the toolkit flows through this class so that runs are
/// reproducible bit-for-bit from a single seed. Independent streams are
/// derived with `substream(seed, k)`: the k-th stream is the generator seeded
/// with splitmix64(seed XOR (k+1)*0x9E3779B97F4A7C15). Replicas, trials and
/// samplers each get their own stream index.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
  }

  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(seed ^ ((stream + 1) * 0x9E3779B97F4A7C15ULL));
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>(uniform() * static_cast<double>(n)) % n;
  }

  /// Standard normal via Marsaglia's polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, q;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    const double f = std::sqrt(-2.0 * std::log(q) / q);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  Vector normal_vector(int n) {
    Vector out(n);
    for (int i = 0; i < n; ++i) out(i) = normal();
    return out;
  }

  Vector uniform_vector(int n, double a, double b) {
    Vector out(n);
    for (int i = 0; i < n; ++i) out(i) = uniform(a, b);
    return out;
  }

  /// Symmetric Dirichlet(1): normalized unit exponentials.
  Vector dirichlet(int n) {
    Vector out(n);
    for (int i = 0; i < n; ++i) {
      double u;
      do {
        u = uniform();
      } while (u <= 0.0);
      out(i) = -std::log(u);
    }
    return out / out.sum();
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  static std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::array<std::uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace otdro
