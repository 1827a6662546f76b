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

#include <vector>

#include "nmm/mixture.hpp"

// Analytic accounting over the model wiring: trainable-parameter counts,
// inference FLOPs, and receptive-field geometry. The layer enumeration here
// mirrors Model's construction exactly; a test asserts that param_count
// equals the sum of the instantiated tensor sizes.
namespace nmm {

// Trainable parameters split by component. Each tower inside a mega-block
// has the same count.
struct ParamBreakdown {
  struct MegaBlockPart {
    int64_t downsample = 0;
    int64_t per_tower = 0;
    int64_t towers = 0;
  };
  int64_t prologue = 0;
  std::vector<MegaBlockPart> megablocks;
  int64_t epilogue = 0;

  int64_t total() const;
};

ParamBreakdown param_breakdown(const ModelConfig& cfg);

// Full model; equals param_breakdown(cfg).total().
int64_t param_count(const ModelConfig& cfg);

// Parameters reachable with the given mask (masked towers excluded).
int64_t param_count(const ModelConfig& cfg, const TowerMask& mask);

// One residual-block tower including its squeeze-excite gate.
int64_t tower_param_count(const ModelConfig& cfg);

// Inference FLOPs for one batch item with T input frames. Multiplies and
// adds are counted separately (one MAC = 2 FLOPs); activation functions are
// approximated by small per-element constants. Masked towers contribute
// nothing.
int64_t flop_count(const ModelConfig& cfg, int64_t time,
                   const TowerMask* mask = nullptr);

// One entry per time-mixing convolution on the deepest path (depthwise
// convs; pointwise convs have kernel 1 and never mix time). The
// squeeze-excite gate is excluded: its global pooling would make the field
// unbounded, so reports quote this "local" receptive field.
struct ConvPathEntry {
  int64_t kernel = 1;
  int64_t stride = 1;
};

std::vector<ConvPathEntry> main_conv_path(const ModelConfig& cfg);

// RF = 1 + sum_i (k_i - 1) * prod_{j<i} s_j.
int64_t receptive_field_of_path(std::span<const ConvPathEntry> path);

// Over the model's main path.
int64_t receptive_field(const ModelConfig& cfg);

// Closed interval of frame indices; empty() when no frame is reachable.
struct FrameInterval {
  int64_t lo = 0;
  int64_t hi = -1;
  bool empty() const { return hi < lo; }
  int64_t size() const { return empty() ? 0 : hi - lo + 1; }
};

// Output frames whose value can depend on the given input frame.
FrameInterval influenced_output_frames(const ModelConfig& cfg, int64_t time,
                                       int64_t input_frame);

// Input frames that can influence the given output frame. When the window
// is not clipped by the sequence edges its size equals receptive_field().
FrameInterval required_input_frames(const ModelConfig& cfg, int64_t time,
                                    int64_t output_frame);

}  // namespace nmm
