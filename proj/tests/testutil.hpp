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

#include <cmath>
#include <functional>
#include <vector>

#include "nmm/tensor.hpp"

// Finite-difference oracle for gradient checks. The oracle side only ever
// evaluates forward passes, so it stays independent of the analytic
// backward implementations it verifies.
namespace nmm::testing {

inline constexpr double kFdStep = 1e-3;
inline constexpr double kFdTol = 1e-4;

// Fixed random projection so a scalar loss exercises the full Jacobian.
inline std::vector<double> loss_weights(int64_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(static_cast<size_t>(n));
  for (auto& v : w) v = rng.normal();
  return w;
}

inline double weighted_sum(const Tensor<double>& y,
                           const std::vector<double>& w) {
  double acc = 0.0;
  const double* p = y.data();
  for (int64_t i = 0; i < y.size(); ++i) acc += p[i] * w[static_cast<size_t>(i)];
  return acc;
}

inline Tensor<double> weights_as_tensor(const Tensor<double>& like,
                                        const std::vector<double>& w) {
  Tensor<double> t(like.batch(), like.channels(), like.time());
  std::copy(w.begin(), w.end(), t.values().begin());
  return t;
}

// Central differences over every coordinate of t.
inline std::vector<double> fd_gradient(Tensor<double>& t,
                                       const std::function<double()>& loss,
                                       double h = kFdStep) {
  std::vector<double> g(static_cast<size_t>(t.size()));
  double* p = t.data();
  for (int64_t i = 0; i < t.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double plus = loss();
    p[i] = saved - h;
    const double minus = loss();
    p[i] = saved;
    g[static_cast<size_t>(i)] = (plus - minus) / (2.0 * h);
  }
  return g;
}

// Central differences over an index subset (for large parameter tensors).
inline std::vector<std::pair<int64_t, double>> fd_gradient_at(
    Tensor<double>& t, const std::vector<int64_t>& coords,
    const std::function<double()>& loss, double h = kFdStep) {
  std::vector<std::pair<int64_t, double>> g;
  g.reserve(coords.size());
  double* p = t.data();
  for (const int64_t i : coords) {
    const double saved = p[i];
    p[i] = saved + h;
    const double plus = loss();
    p[i] = saved - h;
    const double minus = loss();
    p[i] = saved;
    g.emplace_back(i, (plus - minus) / (2.0 * h));
  }
  return g;
}

// max-norm relative error: ||a - fd||_inf / ||a||_inf.
inline double max_norm_rel_error(std::span<const double> analytic,
                                 std::span<const double> fd) {
  double num = 0.0;
  double den = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    num = std::max(num, std::abs(analytic[i] - fd[i]));
    den = std::max(den, std::abs(analytic[i]));
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

inline std::vector<double> grad_to_vector(const Tensor<double>& t) {
  return std::vector<double>(t.grad().begin(), t.grad().end());
}

}  // namespace nmm::testing
