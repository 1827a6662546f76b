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
#include <vector>

#include "nmm/train.hpp"

// Tower-removal sweep: evaluates a trained model under every configured
// (target mega-block, towers removed, aggregation mode) cell. Towers are
// removed lowest-contribution-first by default, where a tower's
// contribution is the L2 norm of its output on a fixed calibration batch;
// a seeded random order is available as an alternative.
namespace nmm {

enum class RemovalTarget { kFirst, kLast, kAll };

const char* removal_target_name(RemovalTarget target);
// Accepts a comma-separated subset of "first,last,all".
std::vector<RemovalTarget> parse_removal_targets(const std::string& text);

struct RemovalPolicy {
  enum class Kind { kLowestL2, kRandom };
  Kind kind = Kind::kLowestL2;
  uint64_t seed = 0;  // kRandom only
};

// Accepts "l2" or "random:<seed>".
RemovalPolicy parse_removal_policy(const std::string& text);
std::string removal_policy_name(const RemovalPolicy& policy);

// Per mega-block, tower indices in removal order (first entry removed
// first). The L2 policy evaluates one full forward on a calibration batch
// drawn from the config's task.
std::vector<std::vector<int64_t>> tower_removal_order(
    Model<float>& model, const FullConfig& cfg, const RemovalPolicy& policy);

// Mask removing `removed` towers (in the given order) from the targeted
// mega-block(s).
TowerMask removal_mask(const ModelConfig& cfg,
                       const std::vector<std::vector<int64_t>>& order,
                       RemovalTarget target, int64_t removed);

struct SweepRow {
  RemovalTarget target = RemovalTarget::kFirst;
  int64_t removed = 0;
  AggregationMode mode = AggregationMode::kRescaled;
  int64_t params = 0;
  int64_t flops = 0;
  double ter = 0.0;
};

struct SweepReport {
  RemovalPolicy policy;
  int64_t max_removed = 0;      // after clamping
  bool clamped = false;         // max_removed hit min(N) - 1
  int64_t flops_frames = 0;     // reference T used for the flops column
  std::vector<SweepRow> rows;
};

// Grid: targets x removed in [0, max_removed] x modes. max_removed is
// clamped to min(N) - 1 so every mega-block keeps at least one tower.
SweepReport run_sweep(Model<float>& model, const FullConfig& cfg,
                      const std::vector<RemovalTarget>& targets,
                      int64_t max_removed,
                      const std::vector<AggregationMode>& modes,
                      const RemovalPolicy& policy, const EvalSet& eval_set,
                      int threads = 1);

// Tab-separated rows with a header line; '#' comment lines carry the
// policy and reference-length notes.
std::string format_sweep(const SweepReport& report);

}  // namespace nmm
