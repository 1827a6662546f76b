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
#include "nmm/accounting.hpp"

#include <algorithm>

namespace nmm {
namespace {

int64_t floor_div(int64_t a, int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}
int64_t ceil_div(int64_t a, int64_t b) { return floor_div(a + b - 1, b); }

// dw conv + pw conv + batchnorm.
int64_t separable_unit_params(int64_t in, int64_t out, int64_t k) {
  return k * in + in * out + 2 * out;
}

int64_t se_bottleneck(const ModelConfig& cfg) {
  return std::max<int64_t>(1, cfg.channels / cfg.se_reduction);
}

int64_t residual_block_params(const ModelConfig& cfg) {
  const int64_t c = cfg.channels;
  // main dw + main pw + bn, residual pw + bn.
  return cfg.kernel_size * c + c * c + 2 * c + c * c + 2 * c;
}

int64_t se_params(const ModelConfig& cfg) {
  const int64_t c = cfg.channels;
  const int64_t b = se_bottleneck(cfg);
  return c * b + b + b * c + c;  // two biased pointwise convs
}

}  // namespace

int64_t ParamBreakdown::total() const {
  int64_t sum = prologue + epilogue;
  for (const auto& mb : megablocks) sum += mb.downsample + mb.per_tower * mb.towers;
  return sum;
}

ParamBreakdown param_breakdown(const ModelConfig& cfg) {
  cfg.validate();
  const int64_t c = cfg.channels;
  const int64_t k = cfg.kernel_size;
  ParamBreakdown out;
  out.prologue = separable_unit_params(cfg.feature_dim, c, k);
  const int64_t tower =
      cfg.blocks_per_tower * residual_block_params(cfg) + se_params(cfg);
  for (const int64_t n : cfg.towers) {
    ParamBreakdown::MegaBlockPart part;
    part.downsample = 2 * separable_unit_params(c, c, k);
    part.per_tower = tower;
    part.towers = n;
    out.megablocks.push_back(part);
  }
  const int64_t vocab_out = cfg.vocab_size + 1;
  out.epilogue = separable_unit_params(c, c, 2 * k - 1) + c * vocab_out + vocab_out;
  return out;
}

int64_t param_count(const ModelConfig& cfg) { return param_breakdown(cfg).total(); }

int64_t param_count(const ModelConfig& cfg, const TowerMask& mask) {
  mask.validate(cfg);
  ParamBreakdown full = param_breakdown(cfg);
  int64_t sum = full.prologue + full.epilogue;
  for (size_t m = 0; m < full.megablocks.size(); ++m) {
    sum += full.megablocks[m].downsample;
    sum += full.megablocks[m].per_tower * mask.kept(static_cast<int64_t>(m));
  }
  return sum;
}

int64_t tower_param_count(const ModelConfig& cfg) {
  return cfg.blocks_per_tower * residual_block_params(cfg) + se_params(cfg);
}

namespace {

// dw + pw + bn + relu at the unit's output length.
int64_t separable_unit_flops(int64_t in, int64_t out, int64_t k, int64_t t_out) {
  return 2 * k * in * t_out + 2 * in * out * t_out + 2 * out * t_out +
         out * t_out;
}

int64_t residual_block_flops(const ModelConfig& cfg, int64_t t) {
  const int64_t c = cfg.channels;
  const int64_t conv = 2 * cfg.kernel_size * c * t + 2 * c * c * t;
  const int64_t res = 2 * c * c * t;
  const int64_t bn = 2 * (2 * c * t);
  const int64_t add_relu = 2 * c * t;
  return conv + res + bn + add_relu;
}

int64_t se_flops(const ModelConfig& cfg, int64_t t) {
  const int64_t c = cfg.channels;
  const int64_t b = se_bottleneck(cfg);
  // pool, two biased pointwise convs, relu, sigmoid (~4/elem), gate scale.
  return c * t + (2 * c * b + b) + b + (2 * b * c + c) + 4 * c + c * t;
}

}  // namespace

int64_t flop_count(const ModelConfig& cfg, int64_t time, const TowerMask* mask) {
  cfg.validate();
  if (mask != nullptr) mask->validate(cfg);
  const int64_t c = cfg.channels;
  const int64_t k = cfg.kernel_size;
  int64_t flops = 0;

  int64_t t = (time + 1) / 2;  // prologue stride 2
  flops += separable_unit_flops(cfg.feature_dim, c, k, t);

  for (size_t m = 0; m < cfg.towers.size(); ++m) {
    flops += separable_unit_flops(c, c, k, t);  // downsample unit 1
    t = (t + 1) / 2;
    flops += separable_unit_flops(c, c, k, t);  // downsample unit 2, stride 2
    const int64_t kept =
        mask != nullptr ? mask->kept(static_cast<int64_t>(m)) : cfg.towers[m];
    const int64_t tower =
        cfg.blocks_per_tower * residual_block_flops(cfg, t) + se_flops(cfg, t);
    flops += kept * tower;
    flops += 2 * kept * c * t;  // weighted summation
  }

  const int64_t vocab_out = cfg.vocab_size + 1;
  flops += separable_unit_flops(c, c, 2 * k - 1, t);
  flops += 2 * c * vocab_out * t + vocab_out * t;  // biased projection
  flops += 5 * vocab_out * t;                      // log-softmax
  return flops;
}

std::vector<ConvPathEntry> main_conv_path(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<ConvPathEntry> path;
  path.push_back({cfg.kernel_size, 2});  // prologue
  for (size_t m = 0; m < cfg.towers.size(); ++m) {
    path.push_back({cfg.kernel_size, 1});  // downsample unit 1
    path.push_back({cfg.kernel_size, 2});  // downsample unit 2
    for (int64_t r = 0; r < cfg.blocks_per_tower; ++r)
      path.push_back({cfg.kernel_size, 1});  // block main branch
  }
  path.push_back({2 * cfg.kernel_size - 1, 1});  // epilogue
  return path;
}

int64_t receptive_field_of_path(std::span<const ConvPathEntry> path) {
  int64_t rf = 1;
  int64_t stride_product = 1;
  for (const ConvPathEntry& e : path) {
    rf += (e.kernel - 1) * stride_product;
    stride_product *= e.stride;
  }
  return rf;
}

int64_t receptive_field(const ModelConfig& cfg) {
  return receptive_field_of_path(main_conv_path(cfg));
}

FrameInterval influenced_output_frames(const ModelConfig& cfg, int64_t time,
                                       int64_t input_frame) {
  FrameInterval interval{input_frame, input_frame};
  int64_t t = time;
  for (const ConvPathEntry& e : main_conv_path(cfg)) {
    const int64_t pad = (e.kernel - 1) / 2;
    const int64_t t_out = ceil_div(t, e.stride);
    interval.lo = std::max<int64_t>(0, ceil_div(interval.lo - pad, e.stride));
    interval.hi =
        std::min<int64_t>(t_out - 1, floor_div(interval.hi + pad, e.stride));
    if (interval.empty()) return interval;
    t = t_out;
  }
  return interval;
}

FrameInterval required_input_frames(const ModelConfig& cfg, int64_t time,
                                    int64_t output_frame) {
  const std::vector<ConvPathEntry> path = main_conv_path(cfg);
  std::vector<int64_t> in_time(path.size());
  int64_t t = time;
  for (size_t i = 0; i < path.size(); ++i) {
    in_time[i] = t;
    t = ceil_div(t, path[i].stride);
  }
  FrameInterval interval{output_frame, output_frame};
  for (size_t i = path.size(); i-- > 0;) {
    const int64_t pad = (path[i].kernel - 1) / 2;
    interval.lo = interval.lo * path[i].stride - pad;
    interval.hi = interval.hi * path[i].stride - pad + path[i].kernel - 1;
    interval.lo = std::max<int64_t>(0, interval.lo);
    interval.hi = std::min<int64_t>(in_time[i] - 1, interval.hi);
    if (interval.empty()) return interval;
  }
  return interval;
}

}  // namespace nmm
