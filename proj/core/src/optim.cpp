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
#include "nmm/optim.hpp"

#include <cmath>

#include "nmm/check.hpp"

namespace nmm {

void OptimizerConfig::validate() const {
  NMM_CHECK(beta1 > 0.0 && beta1 < 1.0, ConfigError,
            "optimizer.beta1: must be in (0, 1), got " << beta1);
  NMM_CHECK(beta2 > 0.0 && beta2 < 1.0, ConfigError,
            "optimizer.beta2: must be in (0, 1), got " << beta2);
  NMM_CHECK(weight_decay >= 0.0, ConfigError,
            "optimizer.weight_decay: must be >= 0, got " << weight_decay);
  NMM_CHECK(lr_final < lr_init, ConfigError,
            "optimizer.lr_final: must be < lr_init, got " << lr_final
                                                          << " vs " << lr_init);
  NMM_CHECK(warmup_steps >= 0, ConfigError,
            "optimizer.warmup_steps: must be >= 0, got " << warmup_steps);
}

double lr_schedule(int64_t step, int64_t total_steps, const OptimizerConfig& cfg) {
  if (step < 0) step = 0;
  if (step > total_steps) step = total_steps;
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
    return cfg.lr_init * static_cast<double>(step) /
           static_cast<double>(cfg.warmup_steps);
  }
  const int64_t span = total_steps - cfg.warmup_steps;
  const double progress =
      span <= 0 ? 1.0
                : static_cast<double>(step - cfg.warmup_steps) /
                      static_cast<double>(span);
  return cfg.lr_final + (cfg.lr_init - cfg.lr_final) *
                            (1.0 + std::cos(3.14159265358979323846 * progress)) /
                            2.0;
}

template <typename S>
NovoGrad<S>::NovoGrad(const OptimizerConfig& cfg, std::vector<Tensor<S>*> params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  v_.assign(params_.size(), -1.0);
  moment_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    params_[i]->ensure_grad();
    moment_[i].assign(static_cast<size_t>(params_[i]->size()), S(0));
  }
}

template <typename S>
bool NovoGrad<S>::step(double lr) {
  for (Tensor<S>* p : params_) {
    for (const S g : p->grad()) {
      if (!std::isfinite(static_cast<double>(g))) return false;
    }
  }
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor<S>& p = *params_[i];
    double norm2 = 0.0;
    for (const S g : p.grad())
      norm2 += static_cast<double>(g) * static_cast<double>(g);
    v_[i] = v_[i] < 0.0 ? norm2 : cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * norm2;
    const double denom = std::sqrt(v_[i]) + kEps;

    S* w = p.data();
    const S* g = p.grad_data();
    S* m = moment_[i].data();
    const int64_t n = p.size();
    for (int64_t j = 0; j < n; ++j) {
      const double g_hat = static_cast<double>(g[j]) / denom +
                           cfg_.weight_decay * static_cast<double>(w[j]);
      m[j] = static_cast<S>(cfg_.beta1 * static_cast<double>(m[j]) + g_hat);
      w[j] = static_cast<S>(static_cast<double>(w[j]) -
                            lr * static_cast<double>(m[j]));
    }
  }
  return true;
}

template class NovoGrad<float>;
template class NovoGrad<double>;

}  // namespace nmm
