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
#include <vector>

#include "nmm/tensor.hpp"

namespace nmm {

struct OptimizerConfig {
  double lr_init = 0.1;
  double beta1 = 0.8;
  double beta2 = 0.25;
  double weight_decay = 1e-3;
  double lr_final = 1e-5;
  int64_t warmup_steps = 1000;

  void validate() const;
};

// Linear warmup from 0 to lr_init over warmup_steps, then cosine annealing
// down to lr_final at total_steps. Continuous at the warmup boundary.
double lr_schedule(int64_t step, int64_t total_steps,
                   const OptimizerConfig& cfg);

// Layer-wise adaptive optimizer. Per parameter tensor it keeps a scalar
// second moment of the gradient norm and a per-element first moment:
//   v <- beta2 * v + (1 - beta2) * ||g||^2     (v = ||g||^2 on first step)
//   g_hat = g / (sqrt(v) + eps) + weight_decay * w
//   m <- beta1 * m + g_hat
//   w <- w - lr * m
template <typename S>
class NovoGrad {
 public:
  NovoGrad(const OptimizerConfig& cfg, std::vector<Tensor<S>*> params);

  // Applies one update with the given learning rate. Returns false and
  // leaves parameters and state untouched when any gradient is non-finite.
  bool step(double lr);

  static constexpr double kEps = 1e-8;

 private:
  OptimizerConfig cfg_;
  std::vector<Tensor<S>*> params_;
  std::vector<double> v_;                // < 0 marks uninitialized
  std::vector<std::vector<S>> moment_;
};

}  // namespace nmm
