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
#include "nmm/augment.hpp"

#include <algorithm>

#include "nmm/check.hpp"

namespace nmm {

void SpecAugmentConfig::validate() const {
  NMM_CHECK(freq_masks >= 0, ConfigError,
            "task.freq_masks: must be >= 0, got " << freq_masks);
  NMM_CHECK(freq_width_max >= 0, ConfigError,
            "task.freq_width_max: must be >= 0, got " << freq_width_max);
  NMM_CHECK(time_masks >= 0, ConfigError,
            "task.time_masks: must be >= 0, got " << time_masks);
  NMM_CHECK(time_width_max >= 0, ConfigError,
            "task.time_width_max: must be >= 0, got " << time_width_max);
}

template <typename S>
Tensor<S> spec_augment(const Tensor<S>& features, const SpecAugmentConfig& cfg,
                       Rng& rng) {
  cfg.validate();
  Tensor<S> out = features;
  const int64_t channels = features.channels();
  const int64_t time = features.time();
  const int64_t f_max = std::min(cfg.freq_width_max, channels - 1);
  const int64_t t_max = std::min(cfg.time_width_max, time - 1);

  for (int64_t b = 0; b < features.batch(); ++b) {
    for (int64_t m = 0; m < cfg.freq_masks; ++m) {
      const int64_t width =
          static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(f_max + 1)));
      if (width == 0) continue;
      const int64_t start = static_cast<int64_t>(
          rng.uniform_int(static_cast<uint64_t>(channels - width + 1)));
      for (int64_t c = start; c < start + width; ++c) {
        S* row = out.row(b, c);
        std::fill(row, row + time, S(0));
      }
    }
    for (int64_t m = 0; m < cfg.time_masks; ++m) {
      const int64_t width =
          static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(t_max + 1)));
      if (width == 0) continue;
      const int64_t start = static_cast<int64_t>(
          rng.uniform_int(static_cast<uint64_t>(time - width + 1)));
      for (int64_t c = 0; c < channels; ++c) {
        S* row = out.row(b, c);
        std::fill(row + start, row + start + width, S(0));
      }
    }
  }
  return out;
}

template Tensor<float> spec_augment(const Tensor<float>&,
                                    const SpecAugmentConfig&, Rng&);
template Tensor<double> spec_augment(const Tensor<double>&,
                                     const SpecAugmentConfig&, Rng&);

}  // namespace nmm
