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

#include <vector>

#include "nmm/ctc.hpp"
#include "nmm/rng.hpp"
#include "nmm/tensor.hpp"

namespace nmm {

struct SyntheticTaskConfig {
  int64_t frames_per_symbol = 32;
  // Per-element noise; codebook patterns are unit vectors over
  // feature_dim * frames_per_symbol elements, so element magnitudes are
  // ~1/sqrt(dim) and this default gives a per-span SNR of roughly 2.
  double noise_std = 0.02;
  int64_t min_len = 2;
  int64_t max_len = 8;

  void validate() const;
};

template <typename S>
struct Batch {
  Tensor<S> features;               // (B, F, T_max), zero padded
  std::vector<CtcTarget> targets;
  std::vector<int64_t> feature_lengths;  // valid frames per item
};

// Sequence-recognition task over a fixed codebook: every symbol owns a
// random unit-norm feature pattern spanning frames_per_symbol frames, and a
// sample is the concatenation of its symbols' patterns plus Gaussian noise.
// Codebook patterns are regenerated until all pairwise cosine similarities
// are below 0.5, so the task is separable by construction.
template <typename S>
class SyntheticTask {
 public:
  SyntheticTask(int64_t vocab_size, int64_t feature_dim,
                const SyntheticTaskConfig& cfg, uint64_t seed);

  Batch<S> generate(int64_t batch_size, Rng& rng) const;

  int64_t vocab_size() const { return vocab_size_; }
  int64_t feature_dim() const { return feature_dim_; }
  const SyntheticTaskConfig& config() const { return cfg_; }
  // Pattern for one symbol, flattened (feature_dim * frames_per_symbol).
  std::span<const double> pattern(int64_t symbol) const;

 private:
  int64_t vocab_size_;
  int64_t feature_dim_;
  SyntheticTaskConfig cfg_;
  std::vector<std::vector<double>> codebook_;
};

}  // namespace nmm
