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

// Forward kernels plus their exact analytic backward passes. Every forward
// in this file is deterministic for fixed inputs (and fixed rng state where
// one is taken); gradients are verified against central finite differences
// in the test suite.
namespace nmm {
namespace ops {

// Geometry of a 1D convolution over the time axis with symmetric "same"
// zero padding of (kernel_size - 1) / 2. groups is either 1 (full) or
// in_channels (depthwise, which requires out_channels == in_channels).
struct ConvSpec {
  int64_t in_channels = 1;
  int64_t out_channels = 1;
  int64_t kernel_size = 1;  // odd
  int64_t stride = 1;       // 1 or 2
  int64_t groups = 1;

  void validate() const;
  int64_t pad() const { return (kernel_size - 1) / 2; }
  // "Same" padding with stride s maps T input frames to ceil(T / s).
  int64_t out_time(int64_t t) const { return (t + stride - 1) / stride; }
  int64_t weight_count() const {
    return out_channels * (in_channels / groups) * kernel_size;
  }
};

// x: (B, in, T), w: (out, in/groups, k) -> (B, out, ceil(T/stride)).
template <typename S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& w, const ConvSpec& spec);

// Accumulates into *dw (when non-null) and writes dx fresh (when non-null).
template <typename S>
void conv1d_backward(const Tensor<S>& x, const Tensor<S>& w,
                     const ConvSpec& spec, const Tensor<S>& dy, Tensor<S>* dx,
                     Tensor<S>* dw);

template <typename S>
Tensor<S> relu(const Tensor<S>& x);
// Subgradient at 0 is defined as 0.
template <typename S>
Tensor<S> relu_backward(const Tensor<S>& x, const Tensor<S>& dy);

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x);
// Takes the forward output y: d/dx = y * (1 - y).
template <typename S>
Tensor<S> sigmoid_backward(const Tensor<S>& y, const Tensor<S>& dy);

// Elementwise sum. y must either match x exactly or be a (B, C, 1)
// per-channel tensor broadcast over time.
template <typename S>
Tensor<S> add(const Tensor<S>& x, const Tensor<S>& y);

// Gradient of the broadcast side of add: reduces (B, C, T) to (B, C, 1).
template <typename S>
Tensor<S> sum_over_time(const Tensor<S>& g);

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S s);

// Per-channel gains: s is (B, C, 1), y[b,c,t] = x[b,c,t] * s[b,c,0].
template <typename S>
Tensor<S> channel_scale(const Tensor<S>& x, const Tensor<S>& s);
template <typename S>
void channel_scale_backward(const Tensor<S>& x, const Tensor<S>& s,
                            const Tensor<S>& dy, Tensor<S>* dx, Tensor<S>* ds);

// Mean over the time axis -> (B, C, 1).
template <typename S>
Tensor<S> global_avg_pool_time(const Tensor<S>& x);
template <typename S>
Tensor<S> global_avg_pool_time_backward(const Tensor<S>& dy, int64_t time);

// Log-softmax over the channel axis, max-subtracted for stability.
template <typename S>
Tensor<S> log_softmax_channels(const Tensor<S>& x);
// Takes the forward output y: dx = dy - exp(y) * sum_c(dy).
template <typename S>
Tensor<S> log_softmax_channels_backward(const Tensor<S>& y,
                                        const Tensor<S>& dy);

// In training mode zeroes each element with probability p and scales
// survivors by 1/(1-p); identity in eval mode. The survivor mask (0 or
// 1/(1-p)) is written to *mask when non-null so the backward pass can
// replay it. Requires 0 <= p < 1.
template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double p, Rng& rng, bool training,
                  Tensor<S>* mask);
template <typename S>
Tensor<S> dropout_backward(const Tensor<S>& mask, const Tensor<S>& dy);

// Context saved by the batchnorm forward for the backward pass.
template <typename S>
struct BatchNormCache {
  Tensor<S> x_hat;              // normalized input
  std::vector<double> inv_std;  // per channel, 1/sqrt(var + eps)
  bool training = false;
};

// Training mode normalizes with batch statistics over (B, T) per channel
// (biased variance) and updates the running stats in place:
// running <- (1 - momentum) * running + momentum * batch.
template <typename S>
Tensor<S> batchnorm_train(const Tensor<S>& x, const Tensor<S>& gamma,
                          const Tensor<S>& beta, double eps, double momentum,
                          Tensor<S>* running_mean, Tensor<S>* running_var,
                          BatchNormCache<S>* cache);

// Eval mode normalizes with the running statistics (initialized to mean 0,
// var 1, so eval before any training step is well defined).
template <typename S>
Tensor<S> batchnorm_eval(const Tensor<S>& x, const Tensor<S>& gamma,
                         const Tensor<S>& beta, double eps,
                         const Tensor<S>& running_mean,
                         const Tensor<S>& running_var,
                         BatchNormCache<S>* cache);

// Accumulates into *dgamma / *dbeta (when non-null) and writes dx.
template <typename S>
void batchnorm_backward(const BatchNormCache<S>& cache, const Tensor<S>& gamma,
                        const Tensor<S>& dy, Tensor<S>* dx, Tensor<S>* dgamma,
                        Tensor<S>* dbeta);

}  // namespace ops
}  // namespace nmm
