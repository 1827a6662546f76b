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
#include "nmm/layers.hpp"

#include <cmath>

namespace nmm {

template <typename S>
Conv1d<S>::Conv1d(const ops::ConvSpec& spec, bool with_bias, Rng& rng)
    : spec_(spec), has_bias_(with_bias) {
  spec_.validate();
  const int64_t group_in = spec_.in_channels / spec_.groups;
  weight_ = Tensor<S>(spec_.out_channels, group_in, spec_.kernel_size);
  // He-uniform over fan-in; keeps activation variance roughly constant
  // through conv + relu stacks even before batchnorm statistics settle.
  const double bound =
      std::sqrt(6.0 / static_cast<double>(group_in * spec_.kernel_size));
  for (auto& v : weight_.values())
    v = static_cast<S>(rng.uniform(-bound, bound));
  weight_.ensure_grad();
  if (has_bias_) {
    bias_ = Tensor<S>(1, spec_.out_channels, 1);
    bias_.ensure_grad();
  }
}

template <typename S>
Tensor<S> Conv1d<S>::forward(const Tensor<S>& x) {
  cached_x_ = x;
  Tensor<S> y = ops::conv1d(x, weight_, spec_);
  if (has_bias_) {
    for (int64_t b = 0; b < y.batch(); ++b) {
      for (int64_t c = 0; c < y.channels(); ++c) {
        const S v = bias_.at(0, c, 0);
        S* row = y.row(b, c);
        for (int64_t t = 0; t < y.time(); ++t) row[t] += v;
      }
    }
  }
  return y;
}

template <typename S>
Tensor<S> Conv1d<S>::backward(const Tensor<S>& dy) {
  if (has_bias_) {
    // Bias gradient reduces over batch and time.
    Tensor<S> db = ops::sum_over_time(dy);
    for (int64_t b = 0; b < db.batch(); ++b)
      for (int64_t c = 0; c < db.channels(); ++c)
        bias_.grad_at(0, c, 0) += db.at(b, c, 0);
  }
  Tensor<S> dx;
  Tensor<S> dw(weight_.batch(), weight_.channels(), weight_.time());
  ops::conv1d_backward(cached_x_, weight_, spec_, dy, &dx, &dw);
  S* wg = weight_.grad_data();
  const S* dwp = dw.data();
  for (int64_t i = 0; i < dw.size(); ++i) wg[i] += dwp[i];
  return dx;
}

template <typename S>
void Conv1d<S>::visit_params(const std::string& prefix,
                             const TensorVisitor<S>& fn) {
  fn(prefix + ".weight", weight_);
  if (has_bias_) fn(prefix + ".bias", bias_);
}

template <typename S>
BatchNorm1d<S>::BatchNorm1d(int64_t channels) {
  gamma_ = Tensor<S>::full(1, channels, 1, S(1));
  beta_ = Tensor<S>(1, channels, 1);
  running_mean_ = Tensor<S>(1, channels, 1);
  running_var_ = Tensor<S>::full(1, channels, 1, S(1));
  gamma_.ensure_grad();
  beta_.ensure_grad();
}

template <typename S>
Tensor<S> BatchNorm1d<S>::forward(const Tensor<S>& x, bool training) {
  if (training) {
    return ops::batchnorm_train(x, gamma_, beta_, kEps, kMomentum,
                                &running_mean_, &running_var_, &cache_);
  }
  return ops::batchnorm_eval(x, gamma_, beta_, kEps, running_mean_,
                             running_var_, &cache_);
}

template <typename S>
Tensor<S> BatchNorm1d<S>::backward(const Tensor<S>& dy) {
  Tensor<S> dx;
  Tensor<S> dgamma(1, dy.channels(), 1);
  Tensor<S> dbeta(1, dy.channels(), 1);
  ops::batchnorm_backward(cache_, gamma_, dy, &dx, &dgamma, &dbeta);
  for (int64_t c = 0; c < dy.channels(); ++c) {
    gamma_.grad_at(0, c, 0) += dgamma.at(0, c, 0);
    beta_.grad_at(0, c, 0) += dbeta.at(0, c, 0);
  }
  return dx;
}

template <typename S>
void BatchNorm1d<S>::visit_params(const std::string& prefix,
                                  const TensorVisitor<S>& fn) {
  fn(prefix + ".gamma", gamma_);
  fn(prefix + ".beta", beta_);
}

template <typename S>
void BatchNorm1d<S>::visit_buffers(const std::string& prefix,
                                   const TensorVisitor<S>& fn) {
  fn(prefix + ".running_mean", running_mean_);
  fn(prefix + ".running_var", running_var_);
}

template <typename S>
DropoutLayer<S>::DropoutLayer(double p) : p_(p) {
  NMM_CHECK(p >= 0.0 && p < 1.0, ConfigError,
            "dropout: p must be in [0, 1), got " << p);
}

template <typename S>
Tensor<S> DropoutLayer<S>::forward(const Tensor<S>& x, bool training, Rng* rng) {
  if (!training || p_ == 0.0) {
    mask_ = Tensor<S>();
    return x;
  }
  NMM_CHECK(rng != nullptr, ConfigError, "dropout: training mode requires an rng");
  return ops::dropout(x, p_, *rng, true, &mask_);
}

template <typename S>
Tensor<S> DropoutLayer<S>::backward(const Tensor<S>& dy) {
  return ops::dropout_backward(mask_, dy);
}

template class Conv1d<float>;
template class Conv1d<double>;
template class BatchNorm1d<float>;
template class BatchNorm1d<double>;
template class DropoutLayer<float>;
template class DropoutLayer<double>;

}  // namespace nmm
