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

#include <span>
#include <string>
#include <vector>

#include "nmm/blocks.hpp"

// The parallel-tower mixture: mega-blocks of N independent towers over a
// shared downsampled input, combined by a weighted fixed-order summation.
// Training samples Bernoulli tower weights (tower dropout); at inference a
// binary mask selects towers and the kept outputs are reweighted so the
// aggregate keeps its scale without retraining.
namespace nmm {

// Full architecture description.
struct ModelConfig {
  int64_t channels = 384;          // C, per-tower width
  int64_t blocks_per_tower = 5;    // R
  int64_t kernel_size = 11;        // k, odd
  std::vector<int64_t> towers = {5, 6, 7};  // towers per mega-block
  int64_t feature_dim = 80;
  int64_t vocab_size = 28;         // channels out = vocab_size + 1 (blank)
  double tower_dropout_p = 0.0;    // probability a tower output is dropped
  double dropout_p = 0.1;          // elementwise dropout inside blocks
  int64_t se_reduction = 8;

  void validate() const;
  int64_t megablocks() const { return static_cast<int64_t>(towers.size()); }
  // Prologue plus one stride-2 unit per mega-block.
  int64_t total_stride() const { return int64_t{1} << (1 + megablocks()); }
  int64_t out_time(int64_t t) const {
    const int64_t s = total_stride();
    return (t + s - 1) / s;
  }
};

// Per-mega-block boolean tower selection. Textual form:
// "mb1=11011,mb2=111111,mb3=1111111", one bit per tower, ascending index;
// mega-blocks omitted from the text keep all towers.
struct TowerMask {
  std::vector<std::vector<uint8_t>> bits;

  static TowerMask full(const ModelConfig& cfg);
  static TowerMask parse(const std::string& text, const ModelConfig& cfg);
  std::string format() const;

  // Checks arity against the config and that every mega-block keeps >= 1.
  void validate(const ModelConfig& cfg) const;
  int64_t kept(int64_t megablock) const;
  bool is_full() const;
};

enum class AggregationMode {
  kTrainSum,         // w_i ~ Bernoulli(1 - p_drop) / (1 - p_drop)
  kRescaled,         // w_i = N * delta_i / K  (default; preserves the sum)
  kPaperLiteral,     // w_i = delta_i / K      (preserves the mean)
  kUnscaled,         // w_i = delta_i
};

const char* aggregation_mode_name(AggregationMode mode);
// Accepts "rescaled", "paper-literal", "unscaled" (inference modes only).
AggregationMode parse_aggregation_mode(const std::string& name);

// Samples per-tower training weights: each tower kept with probability
// 1 - drop_p and scaled by the inverse keep probability. An all-dropped
// vector is resampled so at least one tower always survives.
std::vector<double> sample_tower_weights(int64_t n, double drop_p, Rng& rng);

// Deterministic inference weights from a mask row.
std::vector<double> inference_weights(std::span<const uint8_t> mask_row,
                                      AggregationMode mode);

// Records of one forward pass, for inspection by tests and tools.
template <typename S>
struct StepTrace {
  std::vector<std::vector<double>> tower_weights;    // per mega-block
  std::vector<std::vector<double>> tower_output_l2;  // 0 for skipped towers
  Tensor<S> logits;                                  // pre-softmax epilogue output
};

template <typename S>
struct ForwardOptions {
  AggregationMode mode = AggregationMode::kRescaled;
  const TowerMask* mask = nullptr;  // inference modes; null keeps all towers
  Rng* rng = nullptr;               // required for kTrainSum and dropout
  bool training = false;
  bool bypass_se = false;           // perturbation analysis only
  int threads = 1;
};

// Downsample block plus N parallel towers with weighted summation. Towers
// with weight zero are skipped entirely: their parameters are never read
// and their gradients stay exactly zero. The summation always runs in
// ascending tower order, so concurrent and sequential evaluation produce
// bit-identical outputs.
template <typename S>
class MegaBlock {
 public:
  MegaBlock() = default;
  MegaBlock(int64_t in_channels, const ModelConfig& cfg, int64_t n_towers,
            Rng& rng);

  Tensor<S> forward(const Tensor<S>& x, std::span<const double> weights,
                    bool training, bool bypass_se, const Rng* dropout_base,
                    int threads, std::vector<double>* output_l2 = nullptr);
  Tensor<S> backward(const Tensor<S>& dy, int threads);

  int64_t tower_count() const { return static_cast<int64_t>(towers_.size()); }
  void visit_params(const std::string& prefix, const TensorVisitor<S>& fn);
  void visit_buffers(const std::string& prefix, const TensorVisitor<S>& fn);

 private:
  DownsampleBlock<S> down_;
  std::vector<Tower<S>> towers_;
  std::vector<double> last_weights_;
};

// Prologue -> mega-blocks -> epilogue. Output is per-frame log-probability
// over vocab_size + 1 channels at T' = ceil(T / total_stride) frames.
template <typename S>
class Model {
 public:
  explicit Model(const ModelConfig& cfg, Rng& init_rng);

  Tensor<S> forward(const Tensor<S>& features, const ForwardOptions<S>& opts,
                    StepTrace<S>* trace = nullptr);
  // Backward from the loss gradient w.r.t. the pre-softmax logits; returns
  // the gradient w.r.t. the input features.
  Tensor<S> backward(const Tensor<S>& d_logits, int threads = 1);

  void zero_grad();
  void visit_params(const TensorVisitor<S>& fn);
  void visit_buffers(const TensorVisitor<S>& fn);
  std::vector<NamedTensor<S>> named_params();
  std::vector<NamedTensor<S>> named_buffers();

  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  Prologue<S> prologue_;
  std::vector<MegaBlock<S>> megablocks_;
  Epilogue<S> epilogue_;
};

// Read-only reconfiguration view: same parameters, fewer towers. The base
// model's stored parameters are never modified through the view.
template <typename S>
class MaskedModel {
 public:
  MaskedModel(Model<S>& model, TowerMask mask,
              AggregationMode mode = AggregationMode::kRescaled);

  Tensor<S> forward(const Tensor<S>& features, int threads = 1,
                    StepTrace<S>* trace = nullptr);

  const TowerMask& mask() const { return mask_; }
  AggregationMode mode() const { return mode_; }
  Model<S>& base() { return *model_; }

 private:
  Model<S>* model_;
  TowerMask mask_;
  AggregationMode mode_;
};

template <typename S>
MaskedModel<S> apply_mask(Model<S>& model, TowerMask mask,
                          AggregationMode mode = AggregationMode::kRescaled) {
  return MaskedModel<S>(model, std::move(mask), mode);
}

// Evaluates the model sequentially and with the given worker count and
// reports whether the outputs are bit-identical (the concurrency contract).
template <typename S>
bool verify_schedule_determinism(Model<S>& model, const Tensor<S>& features,
                                 int threads);

}  // namespace nmm
