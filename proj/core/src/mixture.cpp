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
#include "nmm/mixture.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "nmm/parallel.hpp"

namespace nmm {

void ModelConfig::validate() const {
  NMM_CHECK(channels >= 1, ConfigError, "model.C: must be >= 1, got " << channels);
  NMM_CHECK(blocks_per_tower >= 1, ConfigError,
            "model.R: must be >= 1, got " << blocks_per_tower);
  NMM_CHECK(kernel_size >= 1 && kernel_size % 2 == 1, ConfigError,
            "model.k: must be odd and >= 1, got " << kernel_size);
  NMM_CHECK(!towers.empty(), ConfigError, "model.towers: must not be empty");
  for (size_t i = 0; i < towers.size(); ++i) {
    NMM_CHECK(towers[i] >= 1, ConfigError,
              "model.towers[" << i << "]: must be >= 1, got " << towers[i]);
  }
  NMM_CHECK(feature_dim >= 1, ConfigError,
            "model.feature_dim: must be >= 1, got " << feature_dim);
  NMM_CHECK(vocab_size >= 1, ConfigError,
            "model.vocab: must be >= 1, got " << vocab_size);
  NMM_CHECK(tower_dropout_p >= 0.0 && tower_dropout_p < 1.0, ConfigError,
            "model.tower_dropout_p: must be in [0, 1), got " << tower_dropout_p);
  NMM_CHECK(dropout_p >= 0.0 && dropout_p < 1.0, ConfigError,
            "model.dropout_p: must be in [0, 1), got " << dropout_p);
  NMM_CHECK(se_reduction >= 1, ConfigError,
            "model.se_reduction: must be >= 1, got " << se_reduction);
}

TowerMask TowerMask::full(const ModelConfig& cfg) {
  TowerMask mask;
  mask.bits.reserve(cfg.towers.size());
  for (const int64_t n : cfg.towers)
    mask.bits.emplace_back(static_cast<size_t>(n), uint8_t{1});
  return mask;
}

TowerMask TowerMask::parse(const std::string& text, const ModelConfig& cfg) {
  TowerMask mask = full(cfg);
  std::vector<bool> seen(cfg.towers.size(), false);
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(pos, end - pos);
    const size_t eq = item.find('=');
    NMM_CHECK(eq != std::string::npos && item.rfind("mb", 0) == 0, ConfigError,
              "mask: expected mb<idx>=<bits>, got '" << item << "'");
    const std::string idx_text = item.substr(2, eq - 2);
    NMM_CHECK(!idx_text.empty() &&
                  idx_text.find_first_not_of("0123456789") == std::string::npos,
              ConfigError, "mask: bad mega-block index in '" << item << "'");
    const size_t idx = static_cast<size_t>(std::stoll(idx_text));
    NMM_CHECK(idx >= 1 && idx <= cfg.towers.size(), ConfigError,
              "mask: mega-block index " << idx << " out of range 1.."
                                        << cfg.towers.size());
    NMM_CHECK(!seen[idx - 1], ConfigError,
              "mask: duplicate entry for mb" << idx);
    seen[idx - 1] = true;
    const std::string bits = item.substr(eq + 1);
    NMM_CHECK(static_cast<int64_t>(bits.size()) == cfg.towers[idx - 1],
              ConfigError,
              "mask: mb" << idx << " needs " << cfg.towers[idx - 1]
                         << " bits, got " << bits.size());
    for (size_t i = 0; i < bits.size(); ++i) {
      NMM_CHECK(bits[i] == '0' || bits[i] == '1', ConfigError,
                "mask: mb" << idx << " contains non-binary digit '" << bits[i]
                           << "'");
      mask.bits[idx - 1][i] = bits[i] == '1' ? 1 : 0;
    }
    pos = end + 1;
  }
  mask.validate(cfg);
  return mask;
}

std::string TowerMask::format() const {
  std::string out;
  for (size_t m = 0; m < bits.size(); ++m) {
    if (m > 0) out += ',';
    out += "mb" + std::to_string(m + 1) + "=";
    for (const uint8_t b : bits[m]) out += b ? '1' : '0';
  }
  return out;
}

void TowerMask::validate(const ModelConfig& cfg) const {
  NMM_CHECK(bits.size() == cfg.towers.size(), ConfigError,
            "mask: has " << bits.size() << " mega-blocks, config has "
                         << cfg.towers.size());
  for (size_t m = 0; m < bits.size(); ++m) {
    NMM_CHECK(static_cast<int64_t>(bits[m].size()) == cfg.towers[m], ConfigError,
              "mask: mb" << (m + 1) << " has " << bits[m].size()
                         << " bits, config has " << cfg.towers[m] << " towers");
    NMM_CHECK(kept(static_cast<int64_t>(m)) >= 1, ConfigError,
              "mask: mb" << (m + 1)
                         << " drops every tower; at least one tower required");
  }
}

int64_t TowerMask::kept(int64_t megablock) const {
  const auto& row = bits[static_cast<size_t>(megablock)];
  return std::accumulate(row.begin(), row.end(), int64_t{0});
}

bool TowerMask::is_full() const {
  for (const auto& row : bits)
    for (const uint8_t b : row)
      if (!b) return false;
  return true;
}

const char* aggregation_mode_name(AggregationMode mode) {
  switch (mode) {
    case AggregationMode::kTrainSum: return "train-sum";
    case AggregationMode::kRescaled: return "rescaled";
    case AggregationMode::kPaperLiteral: return "paper-literal";
    case AggregationMode::kUnscaled: return "unscaled";
  }
  return "?";
}

AggregationMode parse_aggregation_mode(const std::string& name) {
  if (name == "rescaled") return AggregationMode::kRescaled;
  if (name == "paper-literal") return AggregationMode::kPaperLiteral;
  if (name == "unscaled") return AggregationMode::kUnscaled;
  throw ConfigError("mode: expected one of rescaled|paper-literal|unscaled, got '" +
                    name + "'");
}

std::vector<double> sample_tower_weights(int64_t n, double drop_p, Rng& rng) {
  NMM_CHECK(drop_p >= 0.0 && drop_p < 1.0, ConfigError,
            "tower_dropout_p: must be in [0, 1), got " << drop_p);
  std::vector<double> weights(static_cast<size_t>(n), 1.0);
  if (drop_p == 0.0) return weights;
  const double inv_keep = 1.0 / (1.0 - drop_p);
  while (true) {
    bool any = false;
    for (auto& w : weights) {
      if (rng.bernoulli(drop_p)) {
        w = 0.0;
      } else {
        w = inv_keep;
        any = true;
      }
    }
    if (any) return weights;
  }
}

std::vector<double> inference_weights(std::span<const uint8_t> mask_row,
                                      AggregationMode mode) {
  const int64_t n = static_cast<int64_t>(mask_row.size());
  int64_t kept = 0;
  for (const uint8_t b : mask_row) kept += b ? 1 : 0;
  NMM_CHECK(kept >= 1, ConfigError, "mask: at least one tower required");
  std::vector<double> weights(mask_row.size(), 0.0);
  double w = 1.0;
  switch (mode) {
    case AggregationMode::kRescaled:
      w = static_cast<double>(n) / static_cast<double>(kept);
      break;
    case AggregationMode::kPaperLiteral:
      w = 1.0 / static_cast<double>(kept);
      break;
    case AggregationMode::kUnscaled:
      w = 1.0;
      break;
    case AggregationMode::kTrainSum:
      throw ConfigError("inference_weights: train-sum is not an inference mode");
  }
  for (size_t i = 0; i < weights.size(); ++i)
    if (mask_row[i]) weights[i] = w;
  return weights;
}

template <typename S>
MegaBlock<S>::MegaBlock(int64_t in_channels, const ModelConfig& cfg,
                        int64_t n_towers, Rng& rng)
    : down_(in_channels, cfg.channels, cfg.kernel_size, rng) {
  towers_.reserve(static_cast<size_t>(n_towers));
  for (int64_t i = 0; i < n_towers; ++i) {
    towers_.emplace_back(cfg.channels, cfg.kernel_size, cfg.blocks_per_tower,
                         cfg.dropout_p, cfg.se_reduction, rng);
  }
}

template <typename S>
Tensor<S> MegaBlock<S>::forward(const Tensor<S>& x,
                                std::span<const double> weights, bool training,
                                bool bypass_se, const Rng* dropout_base,
                                int threads, std::vector<double>* output_l2) {
  const int64_t n = tower_count();
  NMM_CHECK(static_cast<int64_t>(weights.size()) == n, ShapeError,
            "mega-block: got " << weights.size() << " weights for " << n
                               << " towers");
  last_weights_.assign(weights.begin(), weights.end());

  Tensor<S> shared = down_.forward(x, training);

  // All towers read the same downsampled input; each active tower writes
  // only its own slot, so the loop is safe to run concurrently. The
  // reduction below is sequential in ascending index.
  std::vector<Tensor<S>> outputs(static_cast<size_t>(n));
  parallel_indexed(n, threads, [&](int64_t i) {
    if (weights[static_cast<size_t>(i)] == 0.0) return;
    Rng tower_rng =
        dropout_base != nullptr ? dropout_base->fork(static_cast<uint64_t>(i)) : Rng(0);
    outputs[static_cast<size_t>(i)] = towers_[static_cast<size_t>(i)].forward(
        shared, training, bypass_se, &tower_rng);
  });

  if (output_l2 != nullptr) {
    output_l2->assign(static_cast<size_t>(n), 0.0);
    for (int64_t i = 0; i < n; ++i) {
      const Tensor<S>& o = outputs[static_cast<size_t>(i)];
      if (o.empty()) continue;
      double s = 0.0;
      for (const S v : o.values())
        s += static_cast<double>(v) * static_cast<double>(v);
      (*output_l2)[static_cast<size_t>(i)] = std::sqrt(s);
    }
  }

  Tensor<S> acc;
  for (int64_t i = 0; i < n; ++i) {
    const double w = weights[static_cast<size_t>(i)];
    if (w == 0.0) continue;
    Tensor<S> term =
        ops::scale(outputs[static_cast<size_t>(i)], static_cast<S>(w));
    acc = acc.empty() ? std::move(term) : ops::add(acc, term);
  }
  NMM_CHECK(!acc.empty(), ConfigError,
            "mega-block: at least one tower required");
  return acc;
}

template <typename S>
Tensor<S> MegaBlock<S>::backward(const Tensor<S>& dy, int threads) {
  const int64_t n = tower_count();
  std::vector<Tensor<S>> input_grads(static_cast<size_t>(n));
  parallel_indexed(n, threads, [&](int64_t i) {
    const double w = last_weights_[static_cast<size_t>(i)];
    if (w == 0.0) return;
    Tensor<S> d_tower = ops::scale(dy, static_cast<S>(w));
    input_grads[static_cast<size_t>(i)] =
        towers_[static_cast<size_t>(i)].backward(d_tower);
  });
  Tensor<S> d_shared;
  for (int64_t i = 0; i < n; ++i) {
    Tensor<S>& g = input_grads[static_cast<size_t>(i)];
    if (g.empty()) continue;
    d_shared = d_shared.empty() ? std::move(g) : ops::add(d_shared, g);
  }
  return down_.backward(d_shared);
}

template <typename S>
void MegaBlock<S>::visit_params(const std::string& prefix,
                                const TensorVisitor<S>& fn) {
  down_.visit_params(prefix + ".down", fn);
  for (size_t i = 0; i < towers_.size(); ++i)
    towers_[i].visit_params(prefix + ".tower" + std::to_string(i + 1), fn);
}

template <typename S>
void MegaBlock<S>::visit_buffers(const std::string& prefix,
                                 const TensorVisitor<S>& fn) {
  down_.visit_buffers(prefix + ".down", fn);
  for (size_t i = 0; i < towers_.size(); ++i)
    towers_[i].visit_buffers(prefix + ".tower" + std::to_string(i + 1), fn);
}

template <typename S>
Model<S>::Model(const ModelConfig& cfg, Rng& init_rng) : cfg_(cfg) {
  cfg_.validate();
  prologue_ = Prologue<S>(cfg_.feature_dim, cfg_.channels, cfg_.kernel_size,
                          init_rng);
  megablocks_.reserve(cfg_.towers.size());
  for (const int64_t n : cfg_.towers)
    megablocks_.emplace_back(cfg_.channels, cfg_, n, init_rng);
  epilogue_ = Epilogue<S>(cfg_.channels, cfg_.kernel_size, cfg_.vocab_size,
                          init_rng);
}

template <typename S>
Tensor<S> Model<S>::forward(const Tensor<S>& features,
                            const ForwardOptions<S>& opts,
                            StepTrace<S>* trace) {
  NMM_CHECK(features.channels() == cfg_.feature_dim, ShapeError,
            "model: features have " << features.channels()
                                    << " channels, config expects "
                                    << cfg_.feature_dim);
  if (opts.mode == AggregationMode::kTrainSum) {
    NMM_CHECK(opts.rng != nullptr, ConfigError,
              "model: train-sum aggregation requires an rng");
  } else if (opts.mask != nullptr) {
    opts.mask->validate(cfg_);
  }
  if (trace != nullptr) {
    trace->tower_weights.clear();
    trace->tower_output_l2.clear();
  }

  Tensor<S> h = prologue_.forward(features, opts.training);
  for (size_t m = 0; m < megablocks_.size(); ++m) {
    // One derived stream per mega-block: weight sampling first, then one
    // sub-stream per tower, so results do not depend on the execution
    // schedule of the towers.
    Rng mb_rng = opts.rng != nullptr
                     ? opts.rng->fork(0x6d62 + static_cast<uint64_t>(m))
                     : Rng(0);
    std::vector<double> weights;
    if (opts.mode == AggregationMode::kTrainSum) {
      weights = sample_tower_weights(megablocks_[m].tower_count(),
                                     cfg_.tower_dropout_p, mb_rng);
    } else {
      const TowerMask full_mask = TowerMask::full(cfg_);
      const auto& row =
          opts.mask != nullptr ? opts.mask->bits[m] : full_mask.bits[m];
      weights = inference_weights(row, opts.mode);
    }
    std::vector<double> l2;
    h = megablocks_[m].forward(h, weights, opts.training, opts.bypass_se,
                               opts.rng != nullptr ? &mb_rng : nullptr,
                               opts.threads, trace != nullptr ? &l2 : nullptr);
    if (trace != nullptr) {
      trace->tower_weights.push_back(std::move(weights));
      trace->tower_output_l2.push_back(std::move(l2));
    }
  }
  Tensor<S> log_probs = epilogue_.forward(h, opts.training);
  if (trace != nullptr) trace->logits = epilogue_.last_logits();
  return log_probs;
}

template <typename S>
Tensor<S> Model<S>::backward(const Tensor<S>& d_logits, int threads) {
  Tensor<S> d = epilogue_.backward_from_logits(d_logits);
  for (auto it = megablocks_.rbegin(); it != megablocks_.rend(); ++it)
    d = it->backward(d, threads);
  return prologue_.backward(d);
}

template <typename S>
void Model<S>::zero_grad() {
  visit_params([](const std::string&, Tensor<S>& t) { t.zero_grad(); });
}

template <typename S>
void Model<S>::visit_params(const TensorVisitor<S>& fn) {
  prologue_.visit_params("prologue", fn);
  for (size_t m = 0; m < megablocks_.size(); ++m)
    megablocks_[m].visit_params("mb" + std::to_string(m + 1), fn);
  epilogue_.visit_params("epilogue", fn);
}

template <typename S>
void Model<S>::visit_buffers(const TensorVisitor<S>& fn) {
  prologue_.visit_buffers("prologue", fn);
  for (size_t m = 0; m < megablocks_.size(); ++m)
    megablocks_[m].visit_buffers("mb" + std::to_string(m + 1), fn);
  epilogue_.visit_buffers("epilogue", fn);
}

template <typename S>
std::vector<NamedTensor<S>> Model<S>::named_params() {
  std::vector<NamedTensor<S>> out;
  visit_params([&out](const std::string& name, Tensor<S>& t) {
    out.push_back({name, &t});
  });
  return out;
}

template <typename S>
std::vector<NamedTensor<S>> Model<S>::named_buffers() {
  std::vector<NamedTensor<S>> out;
  visit_buffers([&out](const std::string& name, Tensor<S>& t) {
    out.push_back({name, &t});
  });
  return out;
}

template <typename S>
MaskedModel<S>::MaskedModel(Model<S>& model, TowerMask mask,
                            AggregationMode mode)
    : model_(&model), mask_(std::move(mask)), mode_(mode) {
  NMM_CHECK(mode_ != AggregationMode::kTrainSum, ConfigError,
            "apply_mask: train-sum is not an inference mode");
  mask_.validate(model.config());
}

template <typename S>
Tensor<S> MaskedModel<S>::forward(const Tensor<S>& features, int threads,
                                  StepTrace<S>* trace) {
  ForwardOptions<S> opts;
  opts.mode = mode_;
  opts.mask = &mask_;
  opts.training = false;
  opts.threads = threads;
  return model_->forward(features, opts, trace);
}

template <typename S>
bool verify_schedule_determinism(Model<S>& model, const Tensor<S>& features,
                                 int threads) {
  ForwardOptions<S> opts;
  opts.threads = 1;
  const Tensor<S> sequential = model.forward(features, opts);
  opts.threads = threads;
  const Tensor<S> concurrent = model.forward(features, opts);
  if (sequential.size() != concurrent.size()) return false;
  return std::memcmp(sequential.data(), concurrent.data(),
                     sizeof(S) * static_cast<size_t>(sequential.size())) == 0;
}

template class MegaBlock<float>;
template class MegaBlock<double>;
template class Model<float>;
template class Model<double>;
template class MaskedModel<float>;
template class MaskedModel<double>;
template bool verify_schedule_determinism(Model<float>&, const Tensor<float>&, int);
template bool verify_schedule_determinism(Model<double>&, const Tensor<double>&, int);

}  // namespace nmm
