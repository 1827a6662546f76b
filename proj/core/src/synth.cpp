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
#include "nmm/synth.hpp"

#include <cmath>

#include "nmm/check.hpp"

namespace nmm {

void SyntheticTaskConfig::validate() const {
  NMM_CHECK(frames_per_symbol >= 1, ConfigError,
            "task.frames_per_symbol: must be >= 1, got " << frames_per_symbol);
  NMM_CHECK(noise_std >= 0.0, ConfigError,
            "task.noise_std: must be >= 0, got " << noise_std);
  NMM_CHECK(min_len >= 1, ConfigError,
            "task.min_len: must be >= 1, got " << min_len);
  NMM_CHECK(max_len >= min_len, ConfigError,
            "task.max_len: must be >= min_len, got " << max_len << " < "
                                                     << min_len);
}

template <typename S>
SyntheticTask<S>::SyntheticTask(int64_t vocab_size, int64_t feature_dim,
                                const SyntheticTaskConfig& cfg, uint64_t seed)
    : vocab_size_(vocab_size), feature_dim_(feature_dim), cfg_(cfg) {
  cfg_.validate();
  NMM_CHECK(vocab_size >= 1, ConfigError,
            "task: vocab size must be >= 1, got " << vocab_size);
  Rng rng(seed);
  const size_t dim =
      static_cast<size_t>(feature_dim_ * cfg_.frames_per_symbol);
  codebook_.reserve(static_cast<size_t>(vocab_size_));
  for (int64_t v = 0; v < vocab_size_; ++v) {
    for (int attempt = 0;; ++attempt) {
      NMM_CHECK(attempt < 1000, ConfigError,
                "task: could not find a codebook with pairwise cosine "
                "similarity < 0.5; raise feature_dim or frames_per_symbol");
      std::vector<double> pattern(dim);
      double norm2 = 0.0;
      for (auto& p : pattern) {
        p = rng.normal();
        norm2 += p * p;
      }
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& p : pattern) p *= inv;

      bool ok = true;
      for (const auto& other : codebook_) {
        double dot = 0.0;
        for (size_t i = 0; i < dim; ++i) dot += pattern[i] * other[i];
        if (std::abs(dot) >= 0.5) {
          ok = false;
          break;
        }
      }
      if (ok) {
        codebook_.push_back(std::move(pattern));
        break;
      }
    }
  }
}

template <typename S>
std::span<const double> SyntheticTask<S>::pattern(int64_t symbol) const {
  return codebook_[static_cast<size_t>(symbol)];
}

template <typename S>
Batch<S> SyntheticTask<S>::generate(int64_t batch_size, Rng& rng) const {
  NMM_CHECK(batch_size >= 1, ConfigError,
            "task: batch size must be >= 1, got " << batch_size);
  std::vector<std::vector<int32_t>> labels(static_cast<size_t>(batch_size));
  int64_t t_max = 1;
  for (auto& seq : labels) {
    const int64_t len =
        cfg_.min_len + static_cast<int64_t>(rng.uniform_int(
                           static_cast<uint64_t>(cfg_.max_len - cfg_.min_len + 1)));
    seq.resize(static_cast<size_t>(len));
    for (auto& l : seq)
      l = static_cast<int32_t>(rng.uniform_int(static_cast<uint64_t>(vocab_size_)));
    t_max = std::max(t_max, len * cfg_.frames_per_symbol);
  }

  Batch<S> batch;
  batch.features = Tensor<S>(batch_size, feature_dim_, t_max);
  batch.targets.reserve(static_cast<size_t>(batch_size));
  batch.feature_lengths.reserve(static_cast<size_t>(batch_size));

  for (int64_t b = 0; b < batch_size; ++b) {
    const auto& seq = labels[static_cast<size_t>(b)];
    const int64_t valid =
        static_cast<int64_t>(seq.size()) * cfg_.frames_per_symbol;
    for (size_t s = 0; s < seq.size(); ++s) {
      const std::span<const double> pat = pattern(seq[s]);
      const int64_t t0 = static_cast<int64_t>(s) * cfg_.frames_per_symbol;
      for (int64_t f = 0; f < feature_dim_; ++f) {
        for (int64_t j = 0; j < cfg_.frames_per_symbol; ++j) {
          batch.features.at(b, f, t0 + j) = static_cast<S>(
              pat[static_cast<size_t>(f * cfg_.frames_per_symbol + j)]);
        }
      }
    }
    if (cfg_.noise_std > 0.0) {
      for (int64_t f = 0; f < feature_dim_; ++f) {
        S* row = batch.features.row(b, f);
        for (int64_t t = 0; t < valid; ++t)
          row[t] += static_cast<S>(rng.normal() * cfg_.noise_std);
      }
    }
    CtcTarget target;
    target.labels = seq;
    target.blank_id = static_cast<int32_t>(vocab_size_);
    batch.targets.push_back(std::move(target));
    batch.feature_lengths.push_back(valid);
  }
  return batch;
}

template class SyntheticTask<float>;
template class SyntheticTask<double>;

}  // namespace nmm
