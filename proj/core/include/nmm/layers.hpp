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

#include <functional>
#include <string>

#include "nmm/ops.hpp"

// Stateful layer wrappers around the kernels in ops.hpp. Each layer owns its
// parameters (value + gradient buffers) and caches whatever forward context
// its backward pass needs, so a layer instance supports exactly one
// forward/backward pair at a time. Layers never share mutable state, which
// makes concurrent evaluation of disjoint layer stacks safe.
namespace nmm {

// Visitor over named tensors; used for optimizers, checkpoints and counting.
template <typename S>
using TensorVisitor = std::function<void(const std::string&, Tensor<S>&)>;

template <typename S>
class Conv1d {
 public:
  Conv1d() = default;
  // Kaiming-uniform initialization over fan-in = (in/groups) * k.
  Conv1d(const ops::ConvSpec& spec, bool with_bias, Rng& rng);

  Tensor<S> forward(const Tensor<S>& x);
  // Accumulates parameter gradients, returns the input gradient.
  Tensor<S> backward(const Tensor<S>& dy);

  void visit_params(const std::string& prefix, const TensorVisitor<S>& fn);
  const ops::ConvSpec& spec() const { return spec_; }
  Tensor<S>& weight() { return weight_; }
  Tensor<S>& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }

 private:
  ops::ConvSpec spec_;
  Tensor<S> weight_;  // (out, in/groups, k)
  Tensor<S> bias_;    // (1, out, 1) when enabled
  bool has_bias_ = false;
  Tensor<S> cached_x_;
};

template <typename S>
class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  explicit BatchNorm1d(int64_t channels);

  Tensor<S> forward(const Tensor<S>& x, bool training);
  Tensor<S> backward(const Tensor<S>& dy);

  void visit_params(const std::string& prefix, const TensorVisitor<S>& fn);
  void visit_buffers(const std::string& prefix, const TensorVisitor<S>& fn);

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

 private:
  Tensor<S> gamma_;         // (1, C, 1)
  Tensor<S> beta_;          // (1, C, 1)
  Tensor<S> running_mean_;  // buffer, init 0
  Tensor<S> running_var_;   // buffer, init 1
  ops::BatchNormCache<S> cache_;
};

template <typename S>
class DropoutLayer {
 public:
  DropoutLayer() = default;
  explicit DropoutLayer(double p);

  // rng may be null when not training or p == 0.
  Tensor<S> forward(const Tensor<S>& x, bool training, Rng* rng);
  Tensor<S> backward(const Tensor<S>& dy);

  double p() const { return p_; }

 private:
  double p_ = 0.0;
  Tensor<S> mask_;
};

}  // namespace nmm
