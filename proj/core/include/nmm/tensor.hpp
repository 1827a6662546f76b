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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "nmm/check.hpp"
#include "nmm/rng.hpp"

namespace nmm {

// Dense rank-3 array laid out as (batch, channel, time), time contiguous.
// The value buffer is always allocated; the same-shape gradient buffer is
// optional and allocated on demand (parameters carry one, activations do
// not). S is float in the production model and double in the verification
// suites; both instantiations run the same code.
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  Tensor(int64_t batch, int64_t channels, int64_t time)
      : b_(batch), c_(channels), t_(time) {
    NMM_CHECK(batch >= 1 && channels >= 1 && time >= 1, ShapeError,
              "tensor dims must be >= 1, got (" << batch << "," << channels
                                                << "," << time << ")");
    values_.assign(static_cast<size_t>(b_ * c_ * t_), S(0));
  }

  // One-batch-one-channel vector, convenient in tests.
  static Tensor row_vector(std::initializer_list<S> values) {
    Tensor out(1, 1, static_cast<int64_t>(values.size()));
    std::copy(values.begin(), values.end(), out.values_.begin());
    return out;
  }

  static Tensor full(int64_t b, int64_t c, int64_t t, S value) {
    Tensor out(b, c, t);
    std::fill(out.values_.begin(), out.values_.end(), value);
    return out;
  }

  static Tensor randn(int64_t b, int64_t c, int64_t t, Rng& rng,
                      double stddev = 1.0) {
    Tensor out(b, c, t);
    for (auto& v : out.values_) v = static_cast<S>(rng.normal() * stddev);
    return out;
  }

  int64_t batch() const { return b_; }
  int64_t channels() const { return c_; }
  int64_t time() const { return t_; }
  int64_t size() const { return b_ * c_ * t_; }
  bool empty() const { return values_.empty(); }

  bool same_shape(const Tensor& o) const {
    return b_ == o.b_ && c_ == o.c_ && t_ == o.t_;
  }

  S& at(int64_t b, int64_t c, int64_t t) {
    return values_[static_cast<size_t>((b * c_ + c) * t_ + t)];
  }
  S at(int64_t b, int64_t c, int64_t t) const {
    return values_[static_cast<size_t>((b * c_ + c) * t_ + t)];
  }

  // Pointer to the contiguous time row (b, c, :).
  S* row(int64_t b, int64_t c) { return values_.data() + (b * c_ + c) * t_; }
  const S* row(int64_t b, int64_t c) const {
    return values_.data() + (b * c_ + c) * t_;
  }

  S* data() { return values_.data(); }
  const S* data() const { return values_.data(); }
  std::span<S> values() { return values_; }
  std::span<const S> values() const { return values_; }

  bool has_grad() const { return !grad_.empty(); }
  void ensure_grad() {
    if (grad_.empty()) grad_.assign(values_.size(), S(0));
  }
  void zero_grad() { std::fill(grad_.begin(), grad_.end(), S(0)); }
  S* grad_data() { return grad_.data(); }
  const S* grad_data() const { return grad_.data(); }
  std::span<S> grad() { return grad_; }
  std::span<const S> grad() const { return grad_; }
  S& grad_at(int64_t b, int64_t c, int64_t t) {
    return grad_[static_cast<size_t>((b * c_ + c) * t_ + t)];
  }

  bool all_finite() const {
    for (const S v : values_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  double grad_norm2() const {
    double s = 0.0;
    for (const S g : grad_) s += static_cast<double>(g) * static_cast<double>(g);
    return s;
  }

 private:
  int64_t b_ = 0;
  int64_t c_ = 0;
  int64_t t_ = 0;
  std::vector<S> values_;
  std::vector<S> grad_;
};

template <typename S>
struct NamedTensor {
  std::string name;
  Tensor<S>* tensor;
};

}  // namespace nmm
