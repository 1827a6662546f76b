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
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nmm/accounting.hpp"
#include "nmm/checkpoint.hpp"
#include "nmm/config.hpp"
#include "nmm/sweep.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitDeterminism = 4;

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

int default_threads() {
  const char* env = std::getenv("NMM_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  const long v = std::strtol(env, nullptr, 10);
  return v >= 1 ? static_cast<int>(v) : 1;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) throw nmm::ConfigError("cannot open '" + path + "' for writing");
  out << text;
}

struct EvalArgs {
  std::string checkpoint;
  std::string mask_text;
  std::string mode_text = "rescaled";
  int threads = default_threads();
};

int cmd_train(const std::string& config_path, const std::string& out_path,
              std::string metrics_path, std::optional<uint64_t> seed,
              int threads) {
  nmm::FullConfig cfg = nmm::load_config_file(config_path);
  if (seed.has_value()) {
    cfg.train.seed = *seed;
    cfg.validate();
  }
  if (metrics_path.empty()) metrics_path = out_path + ".metrics";

  nmm::Rng init_rng(nmm::model_init_seed(cfg));
  nmm::Model<float> model(cfg.model, init_rng);
  const nmm::TrainOutcome outcome = nmm::train_loop(cfg, model, threads);

  write_text_file(metrics_path, outcome.metrics);
  nmm::save_checkpoint(nmm::checkpoint_from_model(cfg, model), out_path);

  std::cout << "steps=" << outcome.steps_run << "\n";
  if (outcome.final_ter >= 0.0)
    std::cout << "final_ter=" << format_g(outcome.final_ter) << "\n";
  std::cout << "checkpoint=" << out_path << "\n";
  std::cout << "metrics=" << metrics_path << "\n";
  if (outcome.diverged) {
    std::cerr << "training diverged; checkpoint holds the last finite state\n";
    return kExitDiverged;
  }
  return 0;
}

int cmd_eval(const EvalArgs& args) {
  nmm::LoadedModel loaded = nmm::load_model(args.checkpoint);
  const nmm::ModelConfig& mc = loaded.config.model;
  const nmm::TowerMask mask = args.mask_text.empty()
                                  ? nmm::TowerMask::full(mc)
                                  : nmm::TowerMask::parse(args.mask_text, mc);
  const nmm::AggregationMode mode = nmm::parse_aggregation_mode(args.mode_text);

  const nmm::EvalSet eval_set = nmm::make_eval_set(loaded.config);
  const double ter =
      nmm::evaluate_ter(loaded.model, eval_set, &mask, mode, args.threads);
  constexpr int64_t kFrames = 1024;

  std::cout << "mask=" << mask.format() << "\n";
  std::cout << "mode=" << nmm::aggregation_mode_name(mode) << "\n";
  std::cout << "ter=" << format_g(ter) << "\n";
  std::cout << "params=" << nmm::param_count(mc, mask) << "\n";
  std::cout << "flops=" << nmm::flop_count(mc, kFrames, &mask) << "\n";
  return 0;
}

int cmd_sweep(const std::string& checkpoint, const std::string& targets_text,
              int64_t max_removed, const std::string& removal_text,
              const std::string& out_path, int threads) {
  nmm::LoadedModel loaded = nmm::load_model(checkpoint);
  const std::vector<nmm::RemovalTarget> targets =
      nmm::parse_removal_targets(targets_text);
  const nmm::RemovalPolicy policy = nmm::parse_removal_policy(removal_text);
  if (max_removed < 0) {
    max_removed = *std::min_element(loaded.config.model.towers.begin(),
                                    loaded.config.model.towers.end()) -
                  1;
  }
  const nmm::EvalSet eval_set = nmm::make_eval_set(loaded.config);
  const nmm::SweepReport report = nmm::run_sweep(
      loaded.model, loaded.config, targets, max_removed,
      {nmm::AggregationMode::kRescaled, nmm::AggregationMode::kUnscaled},
      policy, eval_set, threads);
  const std::string text = nmm::format_sweep(report);
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text_file(out_path, text);
    std::cout << "report=" << out_path << "\n";
  }
  return 0;
}

int cmd_report(const std::string& config_path, int64_t frames, bool pretty) {
  const nmm::FullConfig cfg = nmm::load_config_file(config_path);
  const nmm::ModelConfig& mc = cfg.model;
  const nmm::ParamBreakdown breakdown = nmm::param_breakdown(mc);

  std::cout << "channels=" << mc.channels << "\n";
  std::cout << "blocks_per_tower=" << mc.blocks_per_tower << "\n";
  std::cout << "kernel_size=" << mc.kernel_size << "\n";
  std::cout << "feature_dim=" << mc.feature_dim << "\n";
  std::cout << "vocab=" << mc.vocab_size << "\n";
  std::cout << "total_stride=" << mc.total_stride() << "\n";
  std::cout << "receptive_field_frames=" << nmm::receptive_field(mc) << "\n";
  std::cout << "# note: local receptive field over the conv path; the "
               "squeeze-excite global pooling is excluded\n";
  std::cout << "params_total=" << breakdown.total() << "\n";
  std::cout << "params_prologue=" << breakdown.prologue << "\n";
  std::cout << "params_epilogue=" << breakdown.epilogue << "\n";
  if (pretty) {
    std::cout << "mega-block | towers | downsample params | per-tower params\n";
    for (size_t m = 0; m < breakdown.megablocks.size(); ++m) {
      const auto& part = breakdown.megablocks[m];
      std::printf("%10zu | %6lld | %17lld | %16lld\n", m + 1,
                  static_cast<long long>(part.towers),
                  static_cast<long long>(part.downsample),
                  static_cast<long long>(part.per_tower));
    }
  } else {
    std::cout << "megablock\ttowers\tdownsample_params\tper_tower_params\n";
    for (size_t m = 0; m < breakdown.megablocks.size(); ++m) {
      const auto& part = breakdown.megablocks[m];
      std::cout << (m + 1) << "\t" << part.towers << "\t" << part.downsample
                << "\t" << part.per_tower << "\n";
    }
  }
  std::cout << "flops_frames=" << frames << "\n";
  std::cout << "flops_total=" << nmm::flop_count(mc, frames) << "\n";
  return 0;
}

int cmd_bench(const std::string& checkpoint, const std::string& mask_text,
              int threads, int64_t repeats, int64_t frames, int64_t batch) {
  if (repeats < 1) {
    std::cerr << "bench: repeats must be >= 1\n";
    return kExitUsage;
  }
  nmm::LoadedModel loaded = nmm::load_model(checkpoint);
  const nmm::ModelConfig& mc = loaded.config.model;
  const nmm::TowerMask mask = mask_text.empty()
                                  ? nmm::TowerMask::full(mc)
                                  : nmm::TowerMask::parse(mask_text, mc);

  nmm::Rng rng(12345);
  const nmm::Tensor<float> features =
      nmm::Tensor<float>::randn(batch, mc.feature_dim, frames, rng);

  nmm::ForwardOptions<float> opts;
  opts.mask = &mask;
  // Determinism pre-check: the sequential and concurrent schedules must
  // produce bit-identical outputs before any timing is reported.
  opts.threads = 1;
  const nmm::Tensor<float> ref = loaded.model.forward(features, opts);
  opts.threads = threads;
  const nmm::Tensor<float> par = loaded.model.forward(features, opts);
  for (int64_t i = 0; i < ref.size(); ++i) {
    if (ref.data()[i] != par.data()[i]) {
      std::cerr << "bench: schedule determinism violation at element " << i
                << "\n";
      return kExitDeterminism;
    }
  }
  std::cout << "determinism=ok\n";
  std::cout << "mask=" << mask.format() << "\n";
  std::cout << "frames=" << frames << "\n";

  auto time_run = [&](int run_threads) {
    std::vector<double> ms;
    ms.reserve(static_cast<size_t>(repeats));
    opts.threads = run_threads;
    for (int64_t r = 0; r < repeats; ++r) {
      const auto start = std::chrono::steady_clock::now();
      loaded.model.forward(features, opts);
      const auto stop = std::chrono::steady_clock::now();
      ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
    std::sort(ms.begin(), ms.end());
    const double median = ms[ms.size() / 2];
    const double p90 = ms[std::min(ms.size() - 1, (ms.size() * 9) / 10)];
    return std::make_pair(median, p90);
  };

  std::cout << "# timing (non-reproducible)\n";
  const auto [med1, p901] = time_run(1);
  std::cout << "threads1.median_ms=" << format_g(med1) << "\n";
  std::cout << "threads1.p90_ms=" << format_g(p901) << "\n";
  const auto [medn, p90n] = time_run(threads);
  std::cout << "threads" << threads << ".median_ms=" << format_g(medn) << "\n";
  std::cout << "threads" << threads << ".p90_ms=" << format_g(p90n) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parallel-tower CTC sequence model: training, reconfiguration "
               "and analysis"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a model from a config file");
  std::string train_config, train_out, train_metrics;
  std::optional<uint64_t> train_seed;
  int train_threads = default_threads();
  train->add_option("--config", train_config, "config file (JSON)")->required();
  train->add_option("--out", train_out, "output checkpoint path")->required();
  train->add_option("--metrics", train_metrics,
                    "metrics log path (default: <out>.metrics)");
  train->add_option("--seed", train_seed, "override train.seed");
  train->add_option("--threads", train_threads, "tower execution workers");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  EvalArgs eval_args;
  eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint path")
      ->required();
  eval->add_option("--mask", eval_args.mask_text,
                   "tower mask, e.g. mb1=11011,mb2=111111");
  eval->add_option("--mode", eval_args.mode_text,
                   "rescaled|paper-literal|unscaled");
  eval->add_option("--threads", eval_args.threads, "tower execution workers");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "tower-removal sweep report");
  std::string sweep_checkpoint, sweep_targets = "first,last,all";
  std::string sweep_removal = "l2", sweep_out;
  int64_t sweep_max_removed = -1;
  int sweep_threads = default_threads();
  sweep->add_option("--checkpoint", sweep_checkpoint, "checkpoint path")
      ->required();
  sweep->add_option("--targets", sweep_targets, "subset of first,last,all");
  sweep->add_option("--max-removed", sweep_max_removed,
                    "max towers removed (default: min(N)-1)");
  sweep->add_option("--removal", sweep_removal, "l2 or random:<seed>");
  sweep->add_option("--out", sweep_out, "write report to file");
  sweep->add_option("--threads", sweep_threads, "tower execution workers");

  // report
  auto* report = app.add_subcommand("report", "architecture report");
  std::string report_config;
  int64_t report_frames = 1024;
  bool report_pretty = false;
  report->add_option("--config", report_config, "config file (JSON)")->required();
  report->add_option("--frames", report_frames, "reference input frames");
  report->add_flag("--pretty", report_pretty, "human-readable tables");

  // bench
  auto* bench = app.add_subcommand("bench", "forward latency benchmark");
  std::string bench_checkpoint, bench_mask;
  int bench_threads = std::max(default_threads(), 2);
  int64_t bench_repeats = 20, bench_frames = 1024, bench_batch = 1;
  bench->add_option("--checkpoint", bench_checkpoint, "checkpoint path")
      ->required();
  bench->add_option("--mask", bench_mask, "tower mask");
  bench->add_option("--threads", bench_threads, "concurrent schedule workers");
  bench->add_option("--repeats", bench_repeats, "timing repetitions");
  bench->add_option("--frames", bench_frames, "input frames");
  bench->add_option("--batch", bench_batch, "batch size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train->parsed())
      return cmd_train(train_config, train_out, train_metrics, train_seed,
                       train_threads);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (sweep->parsed())
      return cmd_sweep(sweep_checkpoint, sweep_targets, sweep_max_removed,
                       sweep_removal, sweep_out, sweep_threads);
    if (report->parsed())
      return cmd_report(report_config, report_frames, report_pretty);
    if (bench->parsed())
      return cmd_bench(bench_checkpoint, bench_mask, bench_threads,
                       bench_repeats, bench_frames, bench_batch);
  } catch (const nmm::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nmm::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
