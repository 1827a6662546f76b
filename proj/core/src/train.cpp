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
#include "nmm/train.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "nmm/ctc.hpp"

namespace nmm {
namespace {

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::vector<int64_t> output_lengths(const ModelConfig& cfg,
                                    const std::vector<int64_t>& input_lengths) {
  std::vector<int64_t> out;
  out.reserve(input_lengths.size());
  for (const int64_t len : input_lengths) out.push_back(cfg.out_time(len));
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  NMM_CHECK(steps >= 0, ConfigError, "train.steps: must be >= 0, got " << steps);
  NMM_CHECK(batch_size >= 1, ConfigError,
            "train.batch_size: must be >= 1, got " << batch_size);
  NMM_CHECK(eval_every >= 1, ConfigError,
            "train.eval_every: must be >= 1, got " << eval_every);
  NMM_CHECK(eval_set_size >= 1, ConfigError,
            "train.eval_set_size: must be >= 1, got " << eval_set_size);
}

void FullConfig::validate() const {
  model.validate();
  optimizer.validate();
  task.validate();
  augment.validate();
  train.validate();
}

uint64_t model_init_seed(const FullConfig& cfg) {
  return Rng(cfg.train.seed).fork(1).state();
}
uint64_t task_seed(const FullConfig& cfg) {
  return Rng(cfg.train.seed).fork(2).state();
}
uint64_t eval_seed(const FullConfig& cfg) {
  return Rng(cfg.train.seed).fork(3).state();
}
uint64_t step_seed(const FullConfig& cfg, int64_t step) {
  return Rng(cfg.train.seed).fork(1000 + static_cast<uint64_t>(step)).state();
}

EvalSet make_eval_set(const FullConfig& cfg) {
  SyntheticTask<float> task(cfg.model.vocab_size, cfg.model.feature_dim,
                            cfg.task, task_seed(cfg));
  Rng rng(eval_seed(cfg));
  EvalSet set;
  set.batch = task.generate(cfg.train.eval_set_size, rng);
  return set;
}

double evaluate_ter(Model<float>& model, const EvalSet& eval_set,
                    const TowerMask* mask, AggregationMode mode, int threads) {
  ForwardOptions<float> opts;
  opts.mode = mode;
  opts.mask = mask;
  opts.training = false;
  opts.threads = threads;
  const Tensor<float> log_probs = model.forward(eval_set.batch.features, opts);
  const std::vector<int64_t> lengths =
      output_lengths(model.config(), eval_set.batch.feature_lengths);
  const auto decoded = greedy_decode(log_probs, &lengths);

  int64_t total_dist = 0;
  int64_t total_ref = 0;
  for (size_t i = 0; i < decoded.size(); ++i) {
    const auto& ref = eval_set.batch.targets[i].labels;
    const int64_t denom = std::max<int64_t>(1, static_cast<int64_t>(ref.size()));
    const double rate = token_error_rate(decoded[i], ref);
    total_dist += static_cast<int64_t>(std::lround(rate * static_cast<double>(denom)));
    total_ref += denom;
  }
  return static_cast<double>(total_dist) / static_cast<double>(total_ref);
}

TrainOutcome train_loop(const FullConfig& cfg, Model<float>& model,
                        int threads) {
  cfg.validate();
  SyntheticTask<float> task(cfg.model.vocab_size, cfg.model.feature_dim,
                            cfg.task, task_seed(cfg));
  const EvalSet eval_set = make_eval_set(cfg);

  std::vector<Tensor<float>*> params;
  for (const NamedTensor<float>& p : model.named_params())
    params.push_back(p.tensor);
  NovoGrad<float> optimizer(cfg.optimizer, params);

  TrainOutcome outcome;
  std::ostringstream metrics;

  for (int64_t step = 1; step <= cfg.train.steps; ++step) {
    Rng step_rng(step_seed(cfg, step));
    Rng batch_rng = step_rng.fork(1);
    Rng augment_rng = step_rng.fork(2);
    Rng model_rng = step_rng.fork(3);

    Batch<float> batch = task.generate(cfg.train.batch_size, batch_rng);
    const Tensor<float> features =
        spec_augment(batch.features, cfg.augment, augment_rng);

    model.zero_grad();
    ForwardOptions<float> opts;
    opts.mode = AggregationMode::kTrainSum;
    opts.rng = &model_rng;
    opts.training = true;
    opts.threads = threads;
    const Tensor<float> log_probs = model.forward(features, opts);

    const std::vector<int64_t> lengths =
        output_lengths(cfg.model, batch.feature_lengths);
    const CtcResult<float> loss = ctc_loss(log_probs, batch.targets, &lengths);

    if (!std::isfinite(loss.loss)) {
      metrics << "# step=" << step << " aborted: non-finite loss\n";
      outcome.diverged = true;
      break;
    }

    model.backward(loss.grad, threads);
    const double lr = lr_schedule(step, cfg.train.steps, cfg.optimizer);
    const bool accepted = optimizer.step(lr);
    if (!accepted)
      metrics << "# step=" << step << " rejected: non-finite gradient\n";

    metrics << "step=" << step << " lr=" << format_g(lr)
            << " loss=" << format_g(loss.loss);
    if (step % cfg.train.eval_every == 0 || step == cfg.train.steps) {
      outcome.final_ter = evaluate_ter(model, eval_set, nullptr,
                                       AggregationMode::kRescaled, threads);
      metrics << " ter=" << format_g(outcome.final_ter);
    }
    metrics << "\n";
    outcome.steps_run = step;
  }

  outcome.metrics = metrics.str();
  return outcome;
}

}  // namespace nmm
