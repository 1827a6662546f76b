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

#include <cstdint>

#include "nmm/rng.hpp"
#include "nmm/tensor.hpp"

namespace nmm {

struct SpecAugmentConfig {
  int64_t freq_masks = 2;
  int64_t freq_width_max = 4;
  int64_t time_masks = 2;
  int64_t time_width_max = 16;

  void validate() const;
};

// Zeroes freq_masks random channel bands and time_masks random frame bands
// per batch item. Each mask width is drawn uniformly from [0, width_max]
// (clamped to dim - 1 when width_max >= dim) and placed uniformly; masks
// may overlap. Training-time augmentation only.
template <typename S>
Tensor<S> spec_augment(const Tensor<S>& features, const SpecAugmentConfig& cfg,
                       Rng& rng);

}  // namespace nmm
