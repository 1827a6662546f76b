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
#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <map>

#include "nmm/accounting.hpp"
#include "nmm/mixture.hpp"
#include "testutil.hpp"

namespace nmm {
namespace {

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.channels = 8;
  cfg.blocks_per_tower = 1;
  cfg.kernel_size = 3;
  cfg.towers = {3, 2, 2};
  cfg.feature_dim = 6;
  cfg.vocab_size = 3;
  cfg.dropout_p = 0.0;
  return cfg;
}

TEST(ModelConfig, ValidationNamesTheField) {
  ModelConfig cfg = toy_config();
  cfg.tower_dropout_p = 1.5;
  try {
    cfg.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("tower_dropout_p"), std::string::npos);
  }
  cfg = toy_config();
  cfg.kernel_size = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = toy_config();
  cfg.towers = {};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = toy_config();
  cfg.towers = {2, 0, 2};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TowerMaskText, ParseFormatRoundTrip) {
  ModelConfig cfg = toy_config();  // towers 3,2,2
  const TowerMask mask = TowerMask::parse("mb1=101,mb2=11,mb3=01", cfg);
  EXPECT_EQ(mask.format(), "mb1=101,mb2=11,mb3=01");
  EXPECT_EQ(mask.kept(0), 2);
  EXPECT_EQ(mask.kept(2), 1);
  const TowerMask again = TowerMask::parse(mask.format(), cfg);
  EXPECT_EQ(again.format(), mask.format());
}

TEST(TowerMaskText, OmittedMegaBlocksKeepAllTowers) {
  ModelConfig cfg = toy_config();
  const TowerMask mask = TowerMask::parse("mb2=01", cfg);
  EXPECT_EQ(mask.format(), "mb1=111,mb2=01,mb3=11");
}

TEST(TowerMaskText, RejectsMalformedInput) {
  ModelConfig cfg = toy_config();
  EXPECT_THROW(TowerMask::parse("mb1=11", cfg), ConfigError);       // arity
  EXPECT_THROW(TowerMask::parse("mb1=000", cfg), ConfigError);      // all zero
  EXPECT_THROW(TowerMask::parse("mb4=11", cfg), ConfigError);       // range
  EXPECT_THROW(TowerMask::parse("mb1=1x1", cfg), ConfigError);      // digit
  EXPECT_THROW(TowerMask::parse("mb1=101,mb1=110", cfg), ConfigError);
  EXPECT_THROW(TowerMask::parse("towers=101", cfg), ConfigError);
}

TEST(AggregationWeights, InferenceModeFormulas) {
  // N = 5, two towers removed -> K = 3.
  const std::vector<uint8_t> row = {1, 0, 1, 1, 0};
  const auto rescaled = inference_weights(row, AggregationMode::kRescaled);
  const auto literal = inference_weights(row, AggregationMode::kPaperLiteral);
  const auto unscaled = inference_weights(row, AggregationMode::kUnscaled);
  EXPECT_DOUBLE_EQ(rescaled[0], 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(rescaled[1], 0.0);
  EXPECT_DOUBLE_EQ(literal[2], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(unscaled[3], 1.0);

  const std::vector<uint8_t> empty = {0, 0};
  EXPECT_THROW(inference_weights(empty, AggregationMode::kRescaled), ConfigError);
}

TEST(AggregationWeights, TrainSamplingNeverDropsEverything) {
  Rng rng(101);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto w = sample_tower_weights(3, 0.9, rng);
    double sum = 0.0;
    for (const double v : w) {
      EXPECT_TRUE(v == 0.0 || std::abs(v - 10.0) < 1e-12);
      sum += v;
    }
    EXPECT_GT(sum, 0.0);
  }
}

TEST(AggregationWeights, ZeroDropProbabilityGivesPlainSum) {
  Rng rng(102);
  const auto w = sample_tower_weights(4, 0.0, rng);
  for (const double v : w) EXPECT_DOUBLE_EQ(v, 1.0);
}

// Copies tower 1's parameters into every other tower of a mega-block.
void tie_towers(MegaBlock<float>& mb) {
  std::map<std::string, Tensor<float>*> params;
  mb.visit_params("mb", [&params](const std::string& name, Tensor<float>& t) {
    params[name] = &t;
  });
  for (auto& [name, t] : params) {
    const std::string prefix = "mb.tower1.";
    if (name.rfind(prefix, 0) != 0) continue;
    for (int64_t i = 2; i <= mb.tower_count(); ++i) {
      const std::string other =
          "mb.tower" + std::to_string(i) + "." + name.substr(prefix.size());
      Tensor<float>* dst = params.at(other);
      std::copy(t->values().begin(), t->values().end(),
                dst->values().begin());
    }
  }
}

TEST(TiedTowers, RescaledReconfigurationIsExact) {
  ModelConfig cfg = toy_config();
  const int64_t n = 4;
  Rng rng(111);
  MegaBlock<float> mb(cfg.channels, cfg, n, rng);
  tie_towers(mb);

  Rng data_rng(112);
  const Tensor<float> x = Tensor<float>::randn(2, cfg.channels, 32, data_rng);
  const std::vector<double> ones(static_cast<size_t>(n), 1.0);
  const Tensor<float> full = mb.forward(x, ones, false, false, nullptr, 1);

  for (int64_t k = 1; k <= n; ++k) {
    std::vector<uint8_t> row(static_cast<size_t>(n), 0);
    for (int64_t i = 0; i < k; ++i) row[static_cast<size_t>(i)] = 1;
    const std::vector<double> weights =
        inference_weights(row, AggregationMode::kRescaled);
    const Tensor<float> out = mb.forward(x, weights, false, false, nullptr, 1);
    double max_rel = 0.0;
    for (int64_t i = 0; i < full.size(); ++i) {
      const double denom =
          std::max(1e-3, std::abs(static_cast<double>(full.data()[i])));
      max_rel = std::max(max_rel,
                         std::abs(static_cast<double>(out.data()[i]) -
                                  static_cast<double>(full.data()[i])) /
                             denom);
    }
    EXPECT_LT(max_rel, 1e-6) << "K=" << k;
  }
}

TEST(Expectation, BernoulliMaskMeanMatchesDeterministicSum) {
  // Raw Bernoulli tower weights (no resampling) through the real weighted
  // aggregation path; the Monte-Carlo mean must match the unmasked sum.
  ModelConfig cfg = toy_config();
  const int64_t n = 5;
  Rng rng(121);
  MegaBlock<double> mb(cfg.channels, cfg, n, rng);
  Rng data_rng(122);
  const Tensor<double> x = Tensor<double>::randn(1, cfg.channels, 8, data_rng);

  const std::vector<double> ones(static_cast<size_t>(n), 1.0);
  const Tensor<double> exact = mb.forward(x, ones, false, false, nullptr, 1);

  const double keep = 0.5;
  const int64_t draws = 10000;
  Tensor<double> mean(exact.batch(), exact.channels(), exact.time());
  Tensor<double> m2(exact.batch(), exact.channels(), exact.time());
  Rng mask_rng(123);
  std::vector<double> w(static_cast<size_t>(n));
  for (int64_t d = 0; d < draws; ++d) {
    bool any = false;
    for (auto& v : w) {
      const bool kept = mask_rng.bernoulli(keep);
      v = kept ? 1.0 / keep : 0.0;
      any = any || kept;
    }
    const Tensor<double> out =
        any ? mb.forward(x, w, false, false, nullptr, 1)
            : Tensor<double>(exact.batch(), exact.channels(), exact.time());
    for (int64_t i = 0; i < out.size(); ++i) {
      const double delta = out.data()[i] - mean.data()[i];
      mean.data()[i] += delta / static_cast<double>(d + 1);
      m2.data()[i] += delta * (out.data()[i] - mean.data()[i]);
    }
  }
  for (int64_t i = 0; i < exact.size(); ++i) {
    const double var = m2.data()[i] / static_cast<double>(draws - 1);
    const double se = std::sqrt(var / static_cast<double>(draws));
    const double z = se > 0.0
                         ? std::abs(mean.data()[i] - exact.data()[i]) / se
                         : 0.0;
    EXPECT_LT(z, 4.0) << "element " << i;
  }
}

TEST(ModelForward, ShapeContractAndMaskedShape) {
  ModelConfig cfg;
  cfg.channels = 32;
  cfg.blocks_per_tower = 2;
  cfg.kernel_size = 11;
  cfg.towers = {2, 2, 2};
  cfg.feature_dim = 40;
  cfg.vocab_size = 4;
  cfg.dropout_p = 0.0;
  Rng rng(131);
  Model<float> model(cfg, rng);
  Rng data_rng(132);
  const Tensor<float> feats = Tensor<float>::randn(1, 40, 64, data_rng);

  ForwardOptions<float> opts;
  const Tensor<float> full = model.forward(feats, opts);
  EXPECT_EQ(full.batch(), 1);
  EXPECT_EQ(full.channels(), 5);
  EXPECT_EQ(full.time(), 4);

  const Tensor<float> again = model.forward(feats, opts);
  EXPECT_EQ(0, std::memcmp(full.data(), again.data(),
                           sizeof(float) * static_cast<size_t>(full.size())));

  const TowerMask mask = TowerMask::parse("mb1=10,mb2=01,mb3=10", cfg);
  ForwardOptions<float> masked;
  masked.mask = &mask;
  const Tensor<float> out = model.forward(feats, masked);
  EXPECT_TRUE(out.same_shape(full));
  EXPECT_NE(0, std::memcmp(full.data(), out.data(),
                           sizeof(float) * static_cast<size_t>(full.size())));
}

TEST(ModelForward, TrainSumRequiresRng) {
  ModelConfig cfg = toy_config();
  Rng rng(141);
  Model<float> model(cfg, rng);
  Rng data_rng(142);
  const Tensor<float> feats = Tensor<float>::randn(1, cfg.feature_dim, 16, data_rng);
  ForwardOptions<float> opts;
  opts.mode = AggregationMode::kTrainSum;
  EXPECT_THROW(model.forward(feats, opts), ConfigError);
}

TEST(ModelForward, TrainSumWithZeroDropoutEqualsPlainSum) {
  ModelConfig cfg = toy_config();
  Rng rng(143);
  Model<float> model(cfg, rng);
  Rng data_rng(144);
  const Tensor<float> feats = Tensor<float>::randn(1, cfg.feature_dim, 16, data_rng);

  ForwardOptions<float> eval_opts;  // rescaled, full mask == plain sum
  const Tensor<float> plain = model.forward(feats, eval_opts);

  Rng train_rng(145);
  ForwardOptions<float> train_opts;
  train_opts.mode = AggregationMode::kTrainSum;
  train_opts.rng = &train_rng;
  StepTrace<float> trace;
  const Tensor<float> summed = model.forward(feats, train_opts, &trace);
  for (const auto& weights : trace.tower_weights)
    for (const double w : weights) EXPECT_DOUBLE_EQ(w, 1.0);
  EXPECT_EQ(0, std::memcmp(plain.data(), summed.data(),
                           sizeof(float) * static_cast<size_t>(plain.size())));
}

TEST(MaskedView, FullMaskViewMatchesBaseModel) {
  ModelConfig cfg = toy_config();
  Rng rng(151);
  Model<float> model(cfg, rng);
  Rng data_rng(152);
  const Tensor<float> feats = Tensor<float>::randn(2, cfg.feature_dim, 24, data_rng);
  ForwardOptions<float> opts;
  const Tensor<float> base = model.forward(feats, opts);

  MaskedModel<float> view = apply_mask(model, TowerMask::full(cfg));
  const Tensor<float> out = view.forward(feats);
  EXPECT_EQ(0, std::memcmp(base.data(), out.data(),
                           sizeof(float) * static_cast<size_t>(base.size())));
}

TEST(MaskedView, NeverMutatesParameters) {
  ModelConfig cfg = toy_config();
  Rng rng(153);
  Model<float> model(cfg, rng);
  std::vector<float> before;
  model.visit_params([&before](const std::string&, Tensor<float>& t) {
    before.insert(before.end(), t.values().begin(), t.values().end());
  });

  const TowerMask mask = TowerMask::parse("mb1=100,mb2=10,mb3=01", cfg);
  MaskedModel<float> view = apply_mask(model, mask);
  Rng data_rng(154);
  const Tensor<float> feats = Tensor<float>::randn(1, cfg.feature_dim, 16, data_rng);
  view.forward(feats);

  std::vector<float> after;
  model.visit_params([&after](const std::string&, Tensor<float>& t) {
    after.insert(after.end(), t.values().begin(), t.values().end());
  });
  ASSERT_EQ(before.size(), after.size());
  EXPECT_EQ(0, std::memcmp(before.data(), after.data(),
                           before.size() * sizeof(float)));
}

TEST(MaskedView, RejectsAllZeroMegaBlock) {
  ModelConfig cfg = toy_config();
  Rng rng(155);
  Model<float> model(cfg, rng);
  TowerMask mask = TowerMask::full(cfg);
  std::fill(mask.bits[1].begin(), mask.bits[1].end(), uint8_t{0});
  EXPECT_THROW(apply_mask(model, mask), ConfigError);
}

TEST(Determinism, ConcurrentTowersMatchSequentialBitwise) {
  ModelConfig cfg = toy_config();
  cfg.towers = {5, 6, 7};
  Rng rng(161);
  Model<float> model(cfg, rng);
  Rng data_rng(162);
  const Tensor<float> feats = Tensor<float>::randn(2, cfg.feature_dim, 32, data_rng);
  EXPECT_TRUE(verify_schedule_determinism(model, feats, 4));
}

TEST(Determinism, TrainModeForwardIsScheduleIndependent) {
  ModelConfig cfg = toy_config();
  cfg.tower_dropout_p = 0.3;
  cfg.dropout_p = 0.2;
  Rng rng(163);
  Model<float> model(cfg, rng);
  Rng data_rng(164);
  const Tensor<float> feats = Tensor<float>::randn(2, cfg.feature_dim, 32, data_rng);

  const auto run = [&](int threads) {
    Rng step_rng(4242);
    ForwardOptions<float> opts;
    opts.mode = AggregationMode::kTrainSum;
    opts.rng = &step_rng;
    opts.training = true;
    opts.threads = threads;
    return model.forward(feats, opts);
  };
  const Tensor<float> seq = run(1);
  const Tensor<float> par = run(4);
  EXPECT_EQ(0, std::memcmp(seq.data(), par.data(),
                           sizeof(float) * static_cast<size_t>(seq.size())));
}

TEST(Accounting, ParamCountMonotonicInArchitectureKnobs) {
  ModelConfig cfg;  // defaults: C=384, R=5, k=11
  const int64_t base = param_count(cfg);
  ModelConfig wider = cfg;
  wider.channels = 512;
  ModelConfig deeper = cfg;
  deeper.blocks_per_tower = 7;
  ModelConfig longer = cfg;
  longer.kernel_size = 13;
  EXPECT_GT(param_count(wider), base);
  EXPECT_GT(param_count(deeper), base);
  EXPECT_GT(param_count(longer), base);
}

TEST(Accounting, WidthAndDepthScalingRatios) {
  ModelConfig cfg;  // C=384, R=5, k=11, towers 5,6,7
  ModelConfig c512 = cfg;
  c512.channels = 512;
  const double width_ratio = static_cast<double>(param_count(c512)) /
                             static_cast<double>(param_count(cfg));
  EXPECT_GE(width_ratio, 1.6);
  EXPECT_LE(width_ratio, 2.0);

  ModelConfig r7 = cfg;
  r7.blocks_per_tower = 7;
  const double depth_ratio = static_cast<double>(param_count(r7)) /
                             static_cast<double>(param_count(cfg));
  EXPECT_GE(depth_ratio, 1.2);
  EXPECT_LE(depth_ratio, 1.4);
}

TEST(Accounting, MaskedFlopsDropBelowSeventyPercent) {
  ModelConfig cfg;  // towers 5,6,7
  TowerMask mask = TowerMask::full(cfg);
  // Mask half the towers (rounded down) in every mega-block.
  for (auto& row : mask.bits) {
    const size_t drop = row.size() / 2;
    for (size_t i = 0; i < drop; ++i) row[i] = 0;
  }
  const int64_t full = flop_count(cfg, 1024);
  const int64_t masked = flop_count(cfg, 1024, &mask);
  EXPECT_LT(static_cast<double>(masked), 0.7 * static_cast<double>(full));
}

TEST(Accounting, RemovingFourOfFiveTowersShrinksTowerParamsByFourFifths) {
  ModelConfig cfg;  // mb1 has 5 towers
  const ParamBreakdown breakdown = param_breakdown(cfg);
  TowerMask mask = TowerMask::full(cfg);
  for (size_t i = 0; i < 4; ++i) mask.bits[0][i] = 0;
  const int64_t removed = param_count(cfg) - param_count(cfg, mask);
  EXPECT_EQ(removed, 4 * breakdown.megablocks[0].per_tower);
}

TEST(Accounting, MaskedTowersNeverReadDuringForward) {
  // Poison one tower's parameters; masking it out must keep the output
  // finite and identical to the pre-poison masked output.
  ModelConfig cfg = toy_config();
  Rng rng(171);
  Model<float> model(cfg, rng);
  Rng data_rng(172);
  const Tensor<float> feats = Tensor<float>::randn(1, cfg.feature_dim, 16, data_rng);

  const TowerMask mask = TowerMask::parse("mb1=011", cfg);
  ForwardOptions<float> opts;
  opts.mask = &mask;
  const Tensor<float> before = model.forward(feats, opts);

  model.visit_params([](const std::string& name, Tensor<float>& t) {
    if (name.rfind("mb1.tower1.", 0) == 0) {
      for (auto& v : t.values()) v = std::numeric_limits<float>::quiet_NaN();
    }
  });
  const Tensor<float> after = model.forward(feats, opts);
  EXPECT_TRUE(after.all_finite());
  EXPECT_EQ(0, std::memcmp(before.data(), after.data(),
                           sizeof(float) * static_cast<size_t>(before.size())));
}

}  // namespace
}  // namespace nmm
