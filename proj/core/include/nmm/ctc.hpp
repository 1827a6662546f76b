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

#include <cstdint>
#include <span>
#include <vector>

#include "nmm/tensor.hpp"

// Connectionist temporal classification: negative log-likelihood over all
// monotone blank-extended alignments, computed with log-space forward and
// backward recursions (double precision internally), plus an exhaustive
// enumeration oracle, greedy decoding, and token error rate.
namespace nmm {

// Label ids live in [0, blank_id); blank_id is the last channel.
struct CtcTarget {
  std::vector<int32_t> labels;
  int32_t blank_id = 0;
};

template <typename S>
struct CtcResult {
  // Mean negative log-likelihood (natural log) over feasible batch items;
  // +infinity when no item is feasible.
  double loss = 0.0;
  // Gradient of the mean loss w.r.t. the pre-softmax logits; rows over
  // channels sum to zero per frame. Zero for infeasible items.
  Tensor<S> grad;
  std::vector<double> item_loss;       // +infinity for infeasible items
  std::vector<uint8_t> item_feasible;  // 1 = feasible
};

// log_probs: (B, V+1, T') log-probabilities (exp sums to 1 per frame).
// frame_lengths, when given, holds the per-item valid frame count; frames
// beyond it are ignored and receive zero gradient.
template <typename S>
CtcResult<S> ctc_loss(const Tensor<S>& log_probs,
                      const std::vector<CtcTarget>& targets,
                      const std::vector<int64_t>* frame_lengths = nullptr);

// Enumeration oracle: sums the probability of every frame-label sequence
// whose collapse (merge repeats, then drop blanks) equals the target.
// Independent of the recursion path above. Requires (V+1)^T <= 10^7.
// Returns the negative log of the summed probability (+infinity when no
// sequence matches).
template <typename S>
double ctc_brute_force(const Tensor<S>& log_probs, const CtcTarget& target,
                       int64_t batch_item = 0, int64_t frames = -1);

// Per-frame argmax (ties break to the lowest id), collapse repeats, drop
// blanks. The blank is the last channel.
template <typename S>
std::vector<std::vector<int32_t>> greedy_decode(
    const Tensor<S>& log_probs,
    const std::vector<int64_t>* frame_lengths = nullptr);

// Levenshtein distance normalized by max(1, |ref|).
double token_error_rate(std::span<const int32_t> hyp,
                        std::span<const int32_t> ref);

// Minimum frame count that admits any alignment: L plus the number of
// adjacent equal label pairs (a blank is forced between them).
int64_t ctc_min_frames(const CtcTarget& target);

}  // namespace nmm
