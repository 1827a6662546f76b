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
#include "nmm/sweep.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "nmm/accounting.hpp"

namespace nmm {

const char* removal_target_name(RemovalTarget target) {
  switch (target) {
    case RemovalTarget::kFirst: return "first";
    case RemovalTarget::kLast: return "last";
    case RemovalTarget::kAll: return "all";
  }
  return "?";
}

std::vector<RemovalTarget> parse_removal_targets(const std::string& text) {
  std::vector<RemovalTarget> out;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(pos, end - pos);
    if (item == "first") {
      out.push_back(RemovalTarget::kFirst);
    } else if (item == "last") {
      out.push_back(RemovalTarget::kLast);
    } else if (item == "all") {
      out.push_back(RemovalTarget::kAll);
    } else {
      throw ConfigError("targets: expected subset of first,last,all, got '" +
                        item + "'");
    }
    pos = end + 1;
  }
  NMM_CHECK(!out.empty(), ConfigError, "targets: empty list");
  return out;
}

RemovalPolicy parse_removal_policy(const std::string& text) {
  RemovalPolicy policy;
  if (text == "l2") {
    policy.kind = RemovalPolicy::Kind::kLowestL2;
    return policy;
  }
  if (text.rfind("random:", 0) == 0) {
    const std::string seed_text = text.substr(7);
    NMM_CHECK(!seed_text.empty() && seed_text.find_first_not_of("0123456789") ==
                                        std::string::npos,
              ConfigError, "removal: bad seed in '" << text << "'");
    policy.kind = RemovalPolicy::Kind::kRandom;
    policy.seed = std::stoull(seed_text);
    return policy;
  }
  throw ConfigError("removal: expected 'l2' or 'random:<seed>', got '" + text +
                    "'");
}

std::string removal_policy_name(const RemovalPolicy& policy) {
  if (policy.kind == RemovalPolicy::Kind::kLowestL2) return "lowest-l2-first";
  return "random:" + std::to_string(policy.seed);
}

std::vector<std::vector<int64_t>> tower_removal_order(
    Model<float>& model, const FullConfig& cfg, const RemovalPolicy& policy) {
  const ModelConfig& mc = model.config();
  std::vector<std::vector<int64_t>> order(mc.towers.size());

  if (policy.kind == RemovalPolicy::Kind::kRandom) {
    Rng rng(policy.seed);
    for (size_t m = 0; m < mc.towers.size(); ++m) {
      std::vector<int64_t> idx(static_cast<size_t>(mc.towers[m]));
      std::iota(idx.begin(), idx.end(), 0);
      // Fisher-Yates with the project rng.
      for (size_t i = idx.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_int(i));
        std::swap(idx[i - 1], idx[j]);
      }
      order[m] = std::move(idx);
    }
    return order;
  }

  // Lowest output-L2 first, measured on a fixed calibration batch.
  SyntheticTask<float> task(mc.vocab_size, mc.feature_dim, cfg.task,
                            task_seed(cfg));
  Rng calib_rng = Rng(cfg.train.seed).fork(4);
  const Batch<float> calib = task.generate(16, calib_rng);
  StepTrace<float> trace;
  ForwardOptions<float> opts;
  model.forward(calib.features, opts, &trace);
  for (size_t m = 0; m < mc.towers.size(); ++m) {
    std::vector<int64_t> idx(static_cast<size_t>(mc.towers[m]));
    std::iota(idx.begin(), idx.end(), 0);
    const std::vector<double>& l2 = trace.tower_output_l2[m];
    std::stable_sort(idx.begin(), idx.end(), [&l2](int64_t a, int64_t b) {
      return l2[static_cast<size_t>(a)] < l2[static_cast<size_t>(b)];
    });
    order[m] = std::move(idx);
  }
  return order;
}

TowerMask removal_mask(const ModelConfig& cfg,
                       const std::vector<std::vector<int64_t>>& order,
                       RemovalTarget target, int64_t removed) {
  TowerMask mask = TowerMask::full(cfg);
  auto drop = [&](size_t m) {
    for (int64_t r = 0; r < removed; ++r)
      mask.bits[m][static_cast<size_t>(order[m][static_cast<size_t>(r)])] = 0;
  };
  switch (target) {
    case RemovalTarget::kFirst:
      drop(0);
      break;
    case RemovalTarget::kLast:
      drop(cfg.towers.size() - 1);
      break;
    case RemovalTarget::kAll:
      for (size_t m = 0; m < cfg.towers.size(); ++m) drop(m);
      break;
  }
  mask.validate(cfg);
  return mask;
}

SweepReport run_sweep(Model<float>& model, const FullConfig& cfg,
                      const std::vector<RemovalTarget>& targets,
                      int64_t max_removed,
                      const std::vector<AggregationMode>& modes,
                      const RemovalPolicy& policy, const EvalSet& eval_set,
                      int threads) {
  const ModelConfig& mc = model.config();
  const int64_t min_towers =
      *std::min_element(mc.towers.begin(), mc.towers.end());

  SweepReport report;
  report.policy = policy;
  report.clamped = max_removed >= min_towers;
  report.max_removed = std::min(max_removed, min_towers - 1);
  report.flops_frames = 1024;

  const std::vector<std::vector<int64_t>> order =
      tower_removal_order(model, cfg, policy);

  for (const RemovalTarget target : targets) {
    for (int64_t removed = 0; removed <= report.max_removed; ++removed) {
      const TowerMask mask = removal_mask(mc, order, target, removed);
      for (const AggregationMode mode : modes) {
        SweepRow row;
        row.target = target;
        row.removed = removed;
        row.mode = mode;
        row.params = param_count(mc, mask);
        row.flops = flop_count(mc, report.flops_frames, &mask);
        row.ter = evaluate_ter(model, eval_set, &mask, mode, threads);
        report.rows.push_back(row);
      }
    }
  }
  return report;
}

std::string format_sweep(const SweepReport& report) {
  std::ostringstream out;
  out << "# removal policy: " << removal_policy_name(report.policy) << "\n";
  out << "# flops at reference input frames: " << report.flops_frames << "\n";
  if (report.clamped)
    out << "# warning: max_removed clamped to " << report.max_removed
        << " (every mega-block keeps >= 1 tower)\n";
  out << "target\tremoved\tmode\tparams\tflops\tter\n";
  char ter[32];
  for (const SweepRow& row : report.rows) {
    std::snprintf(ter, sizeof(ter), "%.6g", row.ter);
    out << removal_target_name(row.target) << "\t" << row.removed << "\t"
        << aggregation_mode_name(row.mode) << "\t" << row.params << "\t"
        << row.flops << "\t" << ter << "\n";
  }
  return out.str();
}

}  // namespace nmm
