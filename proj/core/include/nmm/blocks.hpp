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

#include "nmm/layers.hpp"

// Network building blocks: separable-conv units, residual blocks, the
// squeeze-excite gate, towers, and the downsampling / prologue / epilogue
// stages. All blocks preserve the (B, C, T) layout; only strided units and
// the channel-mapping units change C or T.
namespace nmm {

// Depthwise conv (k, stride) -> pointwise conv -> batchnorm -> relu.
// The stride lives on the depthwise conv.
template <typename S>
class SeparableConvUnit {
 public:
  SeparableConvUnit() = default;
  SeparableConvUnit(int64_t in_channels, int64_t out_channels, int64_t kernel,
                    int64_t stride, Rng& rng);

  Tensor<S> forward(const Tensor<S>& x, bool training);
  Tensor<S> backward(const Tensor<S>& dy);

  void visit_params(const std::string& prefix, const TensorVisitor<S>& fn);
  void visit_buffers(const std::string& prefix, const TensorVisitor<S>& fn);

 private:
  Conv1d<S> dw_;
  Conv1d<S> pw_;
  BatchNorm1d<S> bn_;
  Tensor<S> preact_;
};

// One residual unit of a tower:
//   main: depthwise(k, stride 1) -> pointwise -> batchnorm
//   residual: pointwise -> batchnorm (applied to the unit input)
//   out = dropout(relu(main + residual))
// Channels and time are preserved exactly.
template <typename S>
class ResidualSepConvBlock {
 public:
  ResidualSepConvBlock() = default;
  ResidualSepConvBlock(int64_t channels, int64_t kernel, double dropout_p,
                       Rng& rng);

  Tensor<S> forward(const Tensor<S>& x, bool training, Rng* rng);
  Tensor<S> backward(const Tensor<S>& dy);

  void visit_params(const std::string& prefix, const TensorVisitor<S>& fn);
  void visit_buffers(const std::string& prefix, const TensorVisitor<S>& fn);

 private:
  Conv1d<S> dw_;
  Conv1d<S> pw_;
  BatchNorm1d<S> bn_main_;
  Conv1d<S> res_pw_;
  BatchNorm1d<S> bn_res_;
  DropoutLayer<S> drop_;
  Tensor<S> preact_;
};

// Global-average-pool gating: y = x * sigmoid(W2 relu(W1 mean_t(x))).
// Bottleneck width is max(1, channels / reduction).
template <typename S>
class SqueezeExcite {
 public:
  SqueezeExcite() = default;
  SqueezeExcite(int64_t channels, int64_t reduction, Rng& rng);

  Tensor<S> forward(const Tensor<S>& x);
  Tensor<S> backward(const Tensor<S>& dy);

  void visit_params(const std::string& prefix, const TensorVisitor<S>& fn);
  int64_t bottleneck() const { return bottleneck_; }
  Tensor<S>& gate_conv1() { return w1_.weight(); }
  Tensor<S>& gate_bias2() { return w2_.bias(); }

 private:
  int64_t bottleneck_ = 1;
  Conv1d<S> w1_;  // pointwise C -> bottleneck, with bias
  Conv1d<S> w2_;  // pointwise bottleneck -> C, with bias
  Tensor<S> cached_x_;
  Tensor<S> h_pre_;  // pre-relu bottleneck activations
  Tensor<S> gate_;   // sigmoid output
};

// R residual blocks followed by one squeeze-excite gate.
template <typename S>
class Tower {
 public:
  Tower() = default;
  Tower(int64_t channels, int64_t kernel, int64_t repeats, double dropout_p,
        int64_t se_reduction, Rng& rng);

  Tensor<S> forward(const Tensor<S>& x, bool training, bool bypass_se, Rng* rng);
  Tensor<S> backward(const Tensor<S>& dy);

  void visit_params(const std::string& prefix, const TensorVisitor<S>& fn);
  void visit_buffers(const std::string& prefix, const TensorVisitor<S>& fn);

 private:
  std::vector<ResidualSepConvBlock<S>> blocks_;
  SqueezeExcite<S> se_;
  bool se_bypassed_ = false;
};

// Two separable-conv units; the second one has stride 2, so the block maps
// T to ceil(T/2) and (optionally) remaps the channel count.
template <typename S>
class DownsampleBlock {
 public:
  DownsampleBlock() = default;
  DownsampleBlock(int64_t in_channels, int64_t out_channels, int64_t kernel,
                  Rng& rng);

  Tensor<S> forward(const Tensor<S>& x, bool training);
  Tensor<S> backward(const Tensor<S>& dy);

  void visit_params(const std::string& prefix, const TensorVisitor<S>& fn);
  void visit_buffers(const std::string& prefix, const TensorVisitor<S>& fn);

 private:
  SeparableConvUnit<S> unit1_;
  SeparableConvUnit<S> unit2_;
};

// One separable-conv unit with stride 2 mapping feature_dim -> channels.
template <typename S>
class Prologue {
 public:
  Prologue() = default;
  Prologue(int64_t feature_dim, int64_t channels, int64_t kernel, Rng& rng);

  Tensor<S> forward(const Tensor<S>& x, bool training) {
    return unit_.forward(x, training);
  }
  Tensor<S> backward(const Tensor<S>& dy) { return unit_.backward(dy); }

  void visit_params(const std::string& prefix, const TensorVisitor<S>& fn) {
    unit_.visit_params(prefix, fn);
  }
  void visit_buffers(const std::string& prefix, const TensorVisitor<S>& fn) {
    unit_.visit_buffers(prefix, fn);
  }

 private:
  SeparableConvUnit<S> unit_;
};

// Separable-conv unit with an enlarged kernel (2k - 1, stride 1), then a
// biased pointwise projection to vocab+1 output channels, then log-softmax
// over channels. forward returns per-frame log-probabilities; the training
// path re-enters below the log-softmax via backward_from_logits, matching a
// loss whose gradient is taken w.r.t. the pre-softmax logits.
template <typename S>
class Epilogue {
 public:
  Epilogue() = default;
  Epilogue(int64_t channels, int64_t kernel, int64_t vocab_size, Rng& rng);

  Tensor<S> forward(const Tensor<S>& x, bool training);
  Tensor<S> backward_from_logits(const Tensor<S>& d_logits);

  const Tensor<S>& last_logits() const { return logits_; }

  void visit_params(const std::string& prefix, const TensorVisitor<S>& fn);
  void visit_buffers(const std::string& prefix, const TensorVisitor<S>& fn);

  // Epilogue kernel relative to the main kernel; a fixed constant so that
  // parameter counts are reproducible from the config alone.
  static int64_t epilogue_kernel(int64_t kernel) { return 2 * kernel - 1; }

 private:
  SeparableConvUnit<S> unit_;
  Conv1d<S> proj_;
  Tensor<S> logits_;
};

}  // namespace nmm
