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
#include "nmm/blocks.hpp"

#include <algorithm>

namespace nmm {
namespace {

template <typename S>
ops::ConvSpec depthwise_spec(int64_t channels, int64_t kernel, int64_t stride) {
  ops::ConvSpec spec;
  spec.in_channels = channels;
  spec.out_channels = channels;
  spec.kernel_size = kernel;
  spec.stride = stride;
  spec.groups = channels;
  return spec;
}

template <typename S>
ops::ConvSpec pointwise_spec(int64_t in_channels, int64_t out_channels) {
  ops::ConvSpec spec;
  spec.in_channels = in_channels;
  spec.out_channels = out_channels;
  spec.kernel_size = 1;
  spec.stride = 1;
  spec.groups = 1;
  return spec;
}

}  // namespace

template <typename S>
SeparableConvUnit<S>::SeparableConvUnit(int64_t in_channels,
                                        int64_t out_channels, int64_t kernel,
                                        int64_t stride, Rng& rng)
    : dw_(depthwise_spec<S>(in_channels, kernel, stride), false, rng),
      pw_(pointwise_spec<S>(in_channels, out_channels), false, rng),
      bn_(out_channels) {}

template <typename S>
Tensor<S> SeparableConvUnit<S>::forward(const Tensor<S>& x, bool training) {
  Tensor<S> h = dw_.forward(x);
  h = pw_.forward(h);
  preact_ = bn_.forward(h, training);
  return ops::relu(preact_);
}

template <typename S>
Tensor<S> SeparableConvUnit<S>::backward(const Tensor<S>& dy) {
  Tensor<S> d = ops::relu_backward(preact_, dy);
  d = bn_.backward(d);
  d = pw_.backward(d);
  return dw_.backward(d);
}

template <typename S>
void SeparableConvUnit<S>::visit_params(const std::string& prefix,
                                        const TensorVisitor<S>& fn) {
  dw_.visit_params(prefix + ".dw", fn);
  pw_.visit_params(prefix + ".pw", fn);
  bn_.visit_params(prefix + ".bn", fn);
}

template <typename S>
void SeparableConvUnit<S>::visit_buffers(const std::string& prefix,
                                         const TensorVisitor<S>& fn) {
  bn_.visit_buffers(prefix + ".bn", fn);
}

template <typename S>
ResidualSepConvBlock<S>::ResidualSepConvBlock(int64_t channels, int64_t kernel,
                                              double dropout_p, Rng& rng)
    : dw_(depthwise_spec<S>(channels, kernel, 1), false, rng),
      pw_(pointwise_spec<S>(channels, channels), false, rng),
      bn_main_(channels),
      res_pw_(pointwise_spec<S>(channels, channels), false, rng),
      bn_res_(channels),
      drop_(dropout_p) {}

template <typename S>
Tensor<S> ResidualSepConvBlock<S>::forward(const Tensor<S>& x, bool training,
                                           Rng* rng) {
  Tensor<S> main = dw_.forward(x);
  main = pw_.forward(main);
  main = bn_main_.forward(main, training);
  Tensor<S> res = res_pw_.forward(x);
  res = bn_res_.forward(res, training);
  preact_ = ops::add(main, res);
  Tensor<S> act = ops::relu(preact_);
  return drop_.forward(act, training, rng);
}

template <typename S>
Tensor<S> ResidualSepConvBlock<S>::backward(const Tensor<S>& dy) {
  Tensor<S> d = drop_.backward(dy);
  d = ops::relu_backward(preact_, d);
  Tensor<S> d_main = bn_main_.backward(d);
  d_main = pw_.backward(d_main);
  Tensor<S> dx = dw_.backward(d_main);
  Tensor<S> d_res = bn_res_.backward(d);
  Tensor<S> dx_res = res_pw_.backward(d_res);
  return ops::add(dx, dx_res);
}

template <typename S>
void ResidualSepConvBlock<S>::visit_params(const std::string& prefix,
                                           const TensorVisitor<S>& fn) {
  dw_.visit_params(prefix + ".dw", fn);
  pw_.visit_params(prefix + ".pw", fn);
  bn_main_.visit_params(prefix + ".bn", fn);
  res_pw_.visit_params(prefix + ".res_pw", fn);
  bn_res_.visit_params(prefix + ".res_bn", fn);
}

template <typename S>
void ResidualSepConvBlock<S>::visit_buffers(const std::string& prefix,
                                            const TensorVisitor<S>& fn) {
  bn_main_.visit_buffers(prefix + ".bn", fn);
  bn_res_.visit_buffers(prefix + ".res_bn", fn);
}

template <typename S>
SqueezeExcite<S>::SqueezeExcite(int64_t channels, int64_t reduction, Rng& rng)
    : bottleneck_(std::max<int64_t>(1, channels / reduction)),
      w1_(pointwise_spec<S>(channels, std::max<int64_t>(1, channels / reduction)),
          true, rng),
      w2_(pointwise_spec<S>(std::max<int64_t>(1, channels / reduction), channels),
          true, rng) {}

template <typename S>
Tensor<S> SqueezeExcite<S>::forward(const Tensor<S>& x) {
  cached_x_ = x;
  Tensor<S> pooled = ops::global_avg_pool_time(x);
  h_pre_ = w1_.forward(pooled);
  Tensor<S> h = ops::relu(h_pre_);
  Tensor<S> s_pre = w2_.forward(h);
  gate_ = ops::sigmoid(s_pre);
  return ops::channel_scale(x, gate_);
}

template <typename S>
Tensor<S> SqueezeExcite<S>::backward(const Tensor<S>& dy) {
  Tensor<S> dx;
  Tensor<S> ds(dy.batch(), dy.channels(), 1);
  ops::channel_scale_backward(cached_x_, gate_, dy, &dx, &ds);
  Tensor<S> d = ops::sigmoid_backward(gate_, ds);
  d = w2_.backward(d);
  d = ops::relu_backward(h_pre_, d);
  d = w1_.backward(d);
  Tensor<S> d_pool = ops::global_avg_pool_time_backward(d, dy.time());
  return ops::add(dx, d_pool);
}

template <typename S>
void SqueezeExcite<S>::visit_params(const std::string& prefix,
                                    const TensorVisitor<S>& fn) {
  w1_.visit_params(prefix + ".w1", fn);
  w2_.visit_params(prefix + ".w2", fn);
}

template <typename S>
Tower<S>::Tower(int64_t channels, int64_t kernel, int64_t repeats,
                double dropout_p, int64_t se_reduction, Rng& rng) {
  NMM_CHECK(repeats >= 1, ConfigError,
            "tower: repeats must be >= 1, got " << repeats);
  blocks_.reserve(static_cast<size_t>(repeats));
  for (int64_t r = 0; r < repeats; ++r)
    blocks_.emplace_back(channels, kernel, dropout_p, rng);
  se_ = SqueezeExcite<S>(channels, se_reduction, rng);
}

template <typename S>
Tensor<S> Tower<S>::forward(const Tensor<S>& x, bool training, bool bypass_se,
                            Rng* rng) {
  Tensor<S> h = x;
  for (auto& block : blocks_) h = block.forward(h, training, rng);
  se_bypassed_ = bypass_se;
  if (!bypass_se) h = se_.forward(h);
  return h;
}

template <typename S>
Tensor<S> Tower<S>::backward(const Tensor<S>& dy) {
  Tensor<S> d = dy;
  if (!se_bypassed_) d = se_.backward(d);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it)
    d = it->backward(d);
  return d;
}

template <typename S>
void Tower<S>::visit_params(const std::string& prefix,
                            const TensorVisitor<S>& fn) {
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].visit_params(prefix + ".block" + std::to_string(i + 1), fn);
  se_.visit_params(prefix + ".se", fn);
}

template <typename S>
void Tower<S>::visit_buffers(const std::string& prefix,
                             const TensorVisitor<S>& fn) {
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].visit_buffers(prefix + ".block" + std::to_string(i + 1), fn);
}

template <typename S>
DownsampleBlock<S>::DownsampleBlock(int64_t in_channels, int64_t out_channels,
                                    int64_t kernel, Rng& rng)
    : unit1_(in_channels, out_channels, kernel, 1, rng),
      unit2_(out_channels, out_channels, kernel, 2, rng) {}

template <typename S>
Tensor<S> DownsampleBlock<S>::forward(const Tensor<S>& x, bool training) {
  return unit2_.forward(unit1_.forward(x, training), training);
}

template <typename S>
Tensor<S> DownsampleBlock<S>::backward(const Tensor<S>& dy) {
  return unit1_.backward(unit2_.backward(dy));
}

template <typename S>
void DownsampleBlock<S>::visit_params(const std::string& prefix,
                                      const TensorVisitor<S>& fn) {
  unit1_.visit_params(prefix + ".u1", fn);
  unit2_.visit_params(prefix + ".u2", fn);
}

template <typename S>
void DownsampleBlock<S>::visit_buffers(const std::string& prefix,
                                       const TensorVisitor<S>& fn) {
  unit1_.visit_buffers(prefix + ".u1", fn);
  unit2_.visit_buffers(prefix + ".u2", fn);
}

template <typename S>
Prologue<S>::Prologue(int64_t feature_dim, int64_t channels, int64_t kernel,
                      Rng& rng)
    : unit_(feature_dim, channels, kernel, 2, rng) {}

template <typename S>
Epilogue<S>::Epilogue(int64_t channels, int64_t kernel, int64_t vocab_size,
                      Rng& rng)
    : unit_(channels, channels, epilogue_kernel(kernel), 1, rng),
      proj_(pointwise_spec<S>(channels, vocab_size + 1), true, rng) {}

template <typename S>
Tensor<S> Epilogue<S>::forward(const Tensor<S>& x, bool training) {
  Tensor<S> h = unit_.forward(x, training);
  logits_ = proj_.forward(h);
  return ops::log_softmax_channels(logits_);
}

template <typename S>
Tensor<S> Epilogue<S>::backward_from_logits(const Tensor<S>& d_logits) {
  return unit_.backward(proj_.backward(d_logits));
}

template <typename S>
void Epilogue<S>::visit_params(const std::string& prefix,
                               const TensorVisitor<S>& fn) {
  unit_.visit_params(prefix + ".unit", fn);
  proj_.visit_params(prefix + ".proj", fn);
}

template <typename S>
void Epilogue<S>::visit_buffers(const std::string& prefix,
                                const TensorVisitor<S>& fn) {
  unit_.visit_buffers(prefix + ".unit", fn);
}

template class SeparableConvUnit<float>;
template class SeparableConvUnit<double>;
template class ResidualSepConvBlock<float>;
template class ResidualSepConvBlock<double>;
template class SqueezeExcite<float>;
template class SqueezeExcite<double>;
template class Tower<float>;
template class Tower<double>;
template class DownsampleBlock<float>;
template class DownsampleBlock<double>;
template class Prologue<float>;
template class Prologue<double>;
template class Epilogue<float>;
template class Epilogue<double>;

}  // namespace nmm
