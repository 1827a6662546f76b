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

#include <string>

#include "nmm/augment.hpp"
#include "nmm/mixture.hpp"
#include "nmm/optim.hpp"
#include "nmm/synth.hpp"

namespace nmm {

struct TrainConfig {
  int64_t steps = 300;
  int64_t batch_size = 8;
  uint64_t seed = 1;
  int64_t eval_every = 50;
  int64_t eval_set_size = 32;

  void validate() const;
};

// Everything needed to build, train and evaluate one model.
struct FullConfig {
  ModelConfig model;
  OptimizerConfig optimizer;
  SyntheticTaskConfig task;
  SpecAugmentConfig augment;
  TrainConfig train;

  void validate() const;
};

// Derived deterministic seeds; every consumer of randomness owns a stream.
uint64_t model_init_seed(const FullConfig& cfg);
uint64_t task_seed(const FullConfig& cfg);
uint64_t eval_seed(const FullConfig& cfg);
uint64_t step_seed(const FullConfig& cfg, int64_t step);

struct TrainOutcome {
  bool diverged = false;
  int64_t steps_run = 0;
  // Newline-delimited records: "step=<int> lr=<float> loss=<float> [ter=<float>]".
  std::string metrics;
  double final_ter = -1.0;
};

// Pre-generated held-out set for token-error-rate evaluation.
struct EvalSet {
  Batch<float> batch;
};

EvalSet make_eval_set(const FullConfig& cfg);

// Greedy token error rate over the set: total edit distance divided by
// total reference length. Evaluation runs with rescaled aggregation, which
// with a full mask is the plain tower sum the model was trained with.
double evaluate_ter(Model<float>& model, const EvalSet& eval_set,
                    const TowerMask* mask = nullptr,
                    AggregationMode mode = AggregationMode::kRescaled,
                    int threads = 1);

// One training run: per step a fresh synthetic batch is augmented, run
// through the model with sampled tower weights and elementwise dropout,
// scored with the sequence loss on valid frame lengths, and the parameters
// updated. Aborts (diverged = true) when the loss stops being finite; the
// model then still holds the last finite-loss parameters.
TrainOutcome train_loop(const FullConfig& cfg, Model<float>& model,
                        int threads = 1);

}  // namespace nmm
