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

#include "nmm/ctc.hpp"
#include "nmm/ops.hpp"
#include "testutil.hpp"

namespace nmm {
namespace {

using nmm::testing::fd_gradient;
using nmm::testing::kFdTol;
using nmm::testing::max_norm_rel_error;

// Uniform log-probabilities over `channels` classes.
Tensor<double> uniform_log_probs(int64_t batch, int64_t channels, int64_t time) {
  return Tensor<double>::full(batch, channels, time,
                              -std::log(static_cast<double>(channels)));
}

Tensor<double> random_log_probs(int64_t batch, int64_t channels, int64_t time,
                                uint64_t seed) {
  Rng rng(seed);
  const Tensor<double> z = Tensor<double>::randn(batch, channels, time, rng, 1.5);
  return ops::log_softmax_channels(z);
}

CtcTarget make_target(std::vector<int32_t> labels, int32_t vocab) {
  CtcTarget t;
  t.labels = std::move(labels);
  t.blank_id = vocab;
  return t;
}

TEST(CtcLoss, SingleFrameUniform) {
  // Two channels {a, blank}, one frame, target "a": p = 0.5, loss = ln 2.
  const Tensor<double> lp = uniform_log_probs(1, 2, 1);
  const auto res = ctc_loss(lp, {make_target({0}, 1)});
  EXPECT_NEAR(res.loss, std::log(2.0), 1e-12);
}

TEST(CtcLoss, TwoFrameUniformSingleLabel) {
  // Alignments {aa, a-, -a} of probability 0.25 each: p = 0.75.
  const Tensor<double> lp = uniform_log_probs(1, 2, 2);
  const auto res = ctc_loss(lp, {make_target({0}, 1)});
  EXPECT_NEAR(res.loss, -std::log(0.75), 1e-12);
}

TEST(CtcLoss, RepeatedLabelNeedsSeparatorFrame) {
  // "aa" needs at least a, blank, a: infeasible in two frames.
  const Tensor<double> lp = uniform_log_probs(1, 2, 2);
  const auto res = ctc_loss(lp, {make_target({0, 0}, 1)});
  EXPECT_TRUE(std::isinf(res.loss));
  EXPECT_EQ(res.item_feasible[0], 0);
  for (const double g : res.grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(CtcLoss, BatchAveragesOverFeasibleItemsOnly) {
  Tensor<double> lp = uniform_log_probs(2, 2, 2);
  const std::vector<CtcTarget> targets = {make_target({0}, 1),
                                          make_target({0, 0}, 1)};
  const auto res = ctc_loss(lp, targets);
  EXPECT_NEAR(res.loss, -std::log(0.75), 1e-12);  // only item 0 counts
  EXPECT_TRUE(std::isinf(res.item_loss[1]));
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t t = 0; t < 2; ++t) EXPECT_EQ(res.grad.at(1, c, t), 0.0);
}

TEST(CtcBruteForce, EmptyTargetIsAllBlankPath) {
  // V=1: channels {a, blank}; p(empty) = p(blank)^3 = 1/8.
  const Tensor<double> lp = uniform_log_probs(1, 2, 3);
  const double loss = ctc_brute_force(lp, make_target({}, 1));
  EXPECT_NEAR(loss, std::log(8.0), 1e-12);
}

TEST(CtcBruteForce, TargetLongerThanFramesHasZeroProbability) {
  const Tensor<double> lp = uniform_log_probs(1, 2, 2);
  const double loss = ctc_brute_force(lp, make_target({0, 0, 0}, 1));
  EXPECT_TRUE(std::isinf(loss));
}

TEST(CtcBruteForce, RejectsOversizedInstances) {
  const Tensor<double> lp = uniform_log_probs(1, 30, 8);
  EXPECT_THROW(ctc_brute_force(lp, make_target({0}, 29)), ConfigError);
}

TEST(CtcOracle, RecursionMatchesEnumerationOn200RandomInstances) {
  Rng gen(2024);
  int64_t tested = 0;
  while (tested < 200) {
    const int64_t vocab = 1 + static_cast<int64_t>(gen.uniform_int(3));  // 1..3
    const int64_t frames = 1 + static_cast<int64_t>(gen.uniform_int(8)); // 1..8
    const int64_t len = static_cast<int64_t>(gen.uniform_int(5));        // 0..4
    std::vector<int32_t> labels(static_cast<size_t>(len));
    for (auto& l : labels)
      l = static_cast<int32_t>(gen.uniform_int(static_cast<uint64_t>(vocab)));
    const CtcTarget target = make_target(labels, static_cast<int32_t>(vocab));
    if (ctc_min_frames(target) > frames) continue;  // keep feasible only

    const Tensor<double> lp =
        random_log_probs(1, vocab + 1, frames, 5000 + static_cast<uint64_t>(tested));
    const auto res = ctc_loss(lp, {target});
    const double brute = ctc_brute_force(lp, target);
    ASSERT_TRUE(std::isfinite(res.loss));
    EXPECT_NEAR(res.loss, brute, 1e-9)
        << "V=" << vocab << " T=" << frames << " L=" << len;
    ++tested;
  }
}

TEST(CtcGradient, MatchesFiniteDifferencesThroughLogSoftmax) {
  Rng rng(77);
  Tensor<double> logits = Tensor<double>::randn(2, 4, 6, rng);
  const std::vector<CtcTarget> targets = {make_target({0, 1}, 3),
                                          make_target({2, 2, 1}, 3)};
  const auto loss = [&]() {
    return ctc_loss(ops::log_softmax_channels(logits), targets).loss;
  };
  const auto res = ctc_loss(ops::log_softmax_channels(logits), targets);
  EXPECT_LT(max_norm_rel_error(res.grad.values(), fd_gradient(logits, loss)),
            kFdTol);
}

TEST(CtcGradient, PerFrameLogitGradientSumsToZero) {
  const Tensor<double> lp = random_log_probs(2, 4, 7, 81);
  const std::vector<CtcTarget> targets = {make_target({0, 2}, 3),
                                          make_target({1}, 3)};
  const auto res = ctc_loss(lp, targets);
  for (int64_t b = 0; b < 2; ++b) {
    for (int64_t t = 0; t < 7; ++t) {
      double sum = 0.0;
      for (int64_t c = 0; c < 4; ++c) sum += res.grad.at(b, c, t);
      EXPECT_LT(std::abs(sum), 1e-6);
    }
  }
}

TEST(CtcGradient, RespectsFrameLengths) {
  const Tensor<double> lp = random_log_probs(1, 3, 6, 82);
  const std::vector<int64_t> lengths = {4};
  const auto res = ctc_loss(lp, {make_target({0, 1}, 2)}, &lengths);
  ASSERT_TRUE(std::isfinite(res.loss));
  for (int64_t c = 0; c < 3; ++c) {
    EXPECT_EQ(res.grad.at(0, c, 4), 0.0);
    EXPECT_EQ(res.grad.at(0, c, 5), 0.0);
  }
  // Loss must equal the same instance truncated to 4 frames.
  const double brute = ctc_brute_force(lp, make_target({0, 1}, 2), 0, 4);
  EXPECT_NEAR(res.loss, brute, 1e-9);
}

TEST(CtcLoss, PermutingBatchItemsPermutesResults) {
  const Tensor<double> lp = random_log_probs(2, 4, 5, 83);
  Tensor<double> swapped(2, 4, 5);
  for (int64_t c = 0; c < 4; ++c) {
    for (int64_t t = 0; t < 5; ++t) {
      swapped.at(0, c, t) = lp.at(1, c, t);
      swapped.at(1, c, t) = lp.at(0, c, t);
    }
  }
  const CtcTarget ta = make_target({0, 1}, 3);
  const CtcTarget tb = make_target({2}, 3);
  const auto ab = ctc_loss(lp, {ta, tb});
  const auto ba = ctc_loss(swapped, {tb, ta});
  EXPECT_NEAR(ab.item_loss[0], ba.item_loss[1], 1e-12);
  EXPECT_NEAR(ab.item_loss[1], ba.item_loss[0], 1e-12);
  EXPECT_NEAR(ab.loss, ba.loss, 1e-12);
}

// Builds a random frame-label sequence whose collapse equals the target by
// inserting blanks and duplicates, both of which leave the collapse fixed.
std::vector<int32_t> random_alignment(const CtcTarget& target, int64_t frames,
                                      Rng& rng) {
  std::vector<int32_t> path;
  for (size_t i = 0; i < target.labels.size(); ++i) {
    if (i > 0 && target.labels[i] == target.labels[i - 1])
      path.push_back(target.blank_id);
    path.push_back(target.labels[i]);
  }
  if (path.empty()) path.push_back(target.blank_id);
  while (static_cast<int64_t>(path.size()) < frames) {
    const size_t pos = static_cast<size_t>(rng.uniform_int(path.size()));
    if (rng.bernoulli(0.5)) {
      path.insert(path.begin() + static_cast<ptrdiff_t>(pos), path[pos]);
    } else {
      path.insert(path.begin() + static_cast<ptrdiff_t>(pos), target.blank_id);
    }
  }
  return path;
}

TEST(CtcLoss, RaisingAValidAlignmentNeverIncreasesLoss) {
  Rng rng(91);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t vocab = 2;
    const int64_t frames = 6;
    const CtcTarget target = make_target({0, 1, 0}, static_cast<int32_t>(vocab));
    Tensor<double> lp = random_log_probs(1, vocab + 1, frames,
                                         900 + static_cast<uint64_t>(trial));
    const std::vector<int32_t> path = random_alignment(target, frames, rng);
    ASSERT_EQ(static_cast<int64_t>(path.size()), frames);

    const double before = ctc_loss(lp, {target}).loss;
    for (int64_t t = 0; t < frames; ++t)
      lp.at(0, path[static_cast<size_t>(t)], t) += rng.uniform();
    const double after = ctc_loss(lp, {target}).loss;
    EXPECT_LE(after, before + 1e-12);
  }
}

TEST(GreedyDecode, CollapseRules) {
  // Frame argmaxes: a a blank b b -> "ab".
  Tensor<float> lp(1, 3, 5);  // channels {a, b, blank}
  auto set_max = [&lp](int64_t t, int64_t c) {
    for (int64_t i = 0; i < 3; ++i) lp.at(0, i, t) = i == c ? 0.0f : -5.0f;
  };
  set_max(0, 0);
  set_max(1, 0);
  set_max(2, 2);
  set_max(3, 1);
  set_max(4, 1);
  const auto out = greedy_decode(lp);
  EXPECT_EQ(out[0], (std::vector<int32_t>{0, 1}));
}

TEST(GreedyDecode, AllBlankIsEmpty) {
  Tensor<float> lp(1, 3, 4);
  for (int64_t t = 0; t < 4; ++t) {
    lp.at(0, 0, t) = -5.0f;
    lp.at(0, 1, t) = -5.0f;
    lp.at(0, 2, t) = 0.0f;
  }
  EXPECT_TRUE(greedy_decode(lp)[0].empty());
}

TEST(GreedyDecode, BlankSeparatesRepeats) {
  Tensor<float> lp(1, 2, 3);  // channels {a, blank}
  lp.at(0, 0, 0) = 0.0f;
  lp.at(0, 1, 0) = -1.0f;
  lp.at(0, 0, 1) = -1.0f;
  lp.at(0, 1, 1) = 0.0f;
  lp.at(0, 0, 2) = 0.0f;
  lp.at(0, 1, 2) = -1.0f;
  EXPECT_EQ(greedy_decode(lp)[0], (std::vector<int32_t>{0, 0}));
}

TEST(GreedyDecode, TiesBreakToLowestId) {
  Tensor<float> lp(1, 3, 1);  // all equal
  const auto out = greedy_decode(lp);
  EXPECT_EQ(out[0], (std::vector<int32_t>{0}));
}

TEST(TokenErrorRate, Examples) {
  const std::vector<int32_t> abc = {0, 1, 2};
  const std::vector<int32_t> axc = {0, 9, 2};
  const std::vector<int32_t> a = {0};
  const std::vector<int32_t> empty;
  EXPECT_DOUBLE_EQ(token_error_rate(abc, abc), 0.0);
  EXPECT_NEAR(token_error_rate(axc, abc), 1.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(token_error_rate(a, empty), 1.0);
  EXPECT_DOUBLE_EQ(token_error_rate(empty, a), 1.0);
}

TEST(CtcFeasibility, MinFramesCountsAdjacentRepeats) {
  EXPECT_EQ(ctc_min_frames(make_target({}, 2)), 0);
  EXPECT_EQ(ctc_min_frames(make_target({0, 1, 0}, 2)), 3);
  EXPECT_EQ(ctc_min_frames(make_target({0, 0, 0}, 2)), 5);
}

}  // namespace
}  // namespace nmm
