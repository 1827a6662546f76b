/* Copyright 2026 The NMM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cmath>
#include <cstdint>

namespace nmm {

// Deterministic pseudo-random generator built on the SplitMix64 finalizer.
// The raw stream is defined purely by 64-bit integer arithmetic, so a given
// seed produces the same sequence on every platform. Distributions are
// hand-rolled on top of the raw stream for the same reason (the standard
// library leaves <random> distributions implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Multiply-shift mapping; the bias is below
  // n / 2^64 and irrelevant at the scales used here.
  uint64_t uniform_int(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller. Two raw draws per sample, no caching,
  // so the stream position depends only on the number of calls.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    // Guard log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Derives an independent generator keyed by (current state, stream).
  // Forking does not advance this generator, so fork(a) and fork(b) taken
  // from the same point are reproducible regardless of evaluation order.
  Rng fork(uint64_t stream) const {
    uint64_t z = state_ ^ (0x9e3779b97f4a7c15ull * (stream + 0x632be59bd9b4e019ull));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return Rng(z ^ (z >> 31));
  }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

}  // namespace nmm
