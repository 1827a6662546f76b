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
#include "nmm/ops.hpp"

#include <algorithm>
#include <cmath>

namespace nmm {
namespace ops {
namespace {

// Floor/ceil division for possibly negative numerators, positive divisors.
int64_t floor_div(int64_t a, int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}
int64_t ceil_div(int64_t a, int64_t b) { return floor_div(a + b - 1, b); }

}  // namespace

void ConvSpec::validate() const {
  NMM_CHECK(in_channels >= 1 && out_channels >= 1, ConfigError,
            "conv: channel counts must be >= 1, got in=" << in_channels
                                                         << " out=" << out_channels);
  NMM_CHECK(kernel_size >= 1 && kernel_size % 2 == 1, ConfigError,
            "conv: kernel_size must be odd and >= 1, got " << kernel_size);
  NMM_CHECK(stride == 1 || stride == 2, ConfigError,
            "conv: stride must be 1 or 2, got " << stride);
  NMM_CHECK(groups == 1 || groups == in_channels, ConfigError,
            "conv: groups must be 1 or in_channels (" << in_channels
                                                      << "), got " << groups);
  NMM_CHECK(groups == 1 || out_channels == in_channels, ConfigError,
            "conv: depthwise requires out_channels == in_channels, got out="
                << out_channels << " in=" << in_channels);
}

template <typename S>
Tensor<S> conv1d(const Tensor<S>& x, const Tensor<S>& w, const ConvSpec& spec) {
  spec.validate();
  NMM_CHECK(x.channels() == spec.in_channels, ShapeError,
            "conv1d: input has " << x.channels() << " channels, spec expects "
                                 << spec.in_channels);
  const int64_t group_in = spec.in_channels / spec.groups;
  NMM_CHECK(w.batch() == spec.out_channels && w.channels() == group_in &&
                w.time() == spec.kernel_size,
            ShapeError,
            "conv1d: weight shape (" << w.batch() << "," << w.channels() << ","
                                     << w.time() << ") inconsistent with spec ("
                                     << spec.out_channels << "," << group_in
                                     << "," << spec.kernel_size << ")");

  const int64_t nb = x.batch();
  const int64_t t_in = x.time();
  const int64_t t_out = spec.out_time(t_in);
  const int64_t pad = spec.pad();
  const int64_t k = spec.kernel_size;
  const int64_t s = spec.stride;
  const int64_t group_out = spec.out_channels / spec.groups;

  Tensor<S> y(nb, spec.out_channels, t_out);
  for (int64_t b = 0; b < nb; ++b) {
    for (int64_t o = 0; o < spec.out_channels; ++o) {
      const int64_t g = o / group_out;
      S* yrow = y.row(b, o);
      for (int64_t ci = 0; ci < group_in; ++ci) {
        const S* xrow = x.row(b, g * group_in + ci);
        const S* wrow = w.row(o, ci);
        for (int64_t j = 0; j < k; ++j) {
          const S wj = wrow[j];
          // Valid output range for tap j: 0 <= to*s - pad + j < t_in.
          const int64_t lo = std::max<int64_t>(0, ceil_div(pad - j, s));
          const int64_t hi =
              std::min<int64_t>(t_out - 1, floor_div(t_in - 1 + pad - j, s));
          const S* xp = xrow + (lo * s - pad + j);
          if (s == 1) {
            for (int64_t to = lo; to <= hi; ++to) yrow[to] += wj * xp[to - lo];
          } else {
            for (int64_t to = lo; to <= hi; ++to)
              yrow[to] += wj * xp[(to - lo) * s];
          }
        }
      }
    }
  }
  return y;
}

template <typename S>
void conv1d_backward(const Tensor<S>& x, const Tensor<S>& w,
                     const ConvSpec& spec, const Tensor<S>& dy, Tensor<S>* dx,
                     Tensor<S>* dw) {
  const int64_t nb = x.batch();
  const int64_t t_in = x.time();
  const int64_t t_out = spec.out_time(t_in);
  NMM_CHECK(dy.batch() == nb && dy.channels() == spec.out_channels &&
                dy.time() == t_out,
            ShapeError, "conv1d_backward: upstream gradient shape ("
                            << dy.batch() << "," << dy.channels() << ","
                            << dy.time() << ") does not match output ("
                            << nb << "," << spec.out_channels << "," << t_out
                            << ")");
  const int64_t pad = spec.pad();
  const int64_t k = spec.kernel_size;
  const int64_t s = spec.stride;
  const int64_t group_in = spec.in_channels / spec.groups;
  const int64_t group_out = spec.out_channels / spec.groups;

  if (dx != nullptr && !dx->same_shape(x)) *dx = Tensor<S>(nb, x.channels(), t_in);

  for (int64_t b = 0; b < nb; ++b) {
    for (int64_t o = 0; o < spec.out_channels; ++o) {
      const int64_t g = o / group_out;
      const S* dyrow = dy.row(b, o);
      for (int64_t ci = 0; ci < group_in; ++ci) {
        const int64_t ci_abs = g * group_in + ci;
        const S* xrow = x.row(b, ci_abs);
        const S* wrow = w.row(o, ci);
        S* dxrow = dx != nullptr ? dx->row(b, ci_abs) : nullptr;
        S* dwrow = dw != nullptr ? dw->row(o, ci) : nullptr;
        for (int64_t j = 0; j < k; ++j) {
          const int64_t lo = std::max<int64_t>(0, ceil_div(pad - j, s));
          const int64_t hi =
              std::min<int64_t>(t_out - 1, floor_div(t_in - 1 + pad - j, s));
          const int64_t x0 = lo * s - pad + j;
          if (dxrow != nullptr) {
            const S wj = wrow[j];
            for (int64_t to = lo; to <= hi; ++to)
              dxrow[x0 + (to - lo) * s] += wj * dyrow[to];
          }
          if (dwrow != nullptr) {
            S acc = 0;
            for (int64_t to = lo; to <= hi; ++to)
              acc += dyrow[to] * xrow[x0 + (to - lo) * s];
            dwrow[j] += acc;
          }
        }
      }
    }
  }
}

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
  Tensor<S> y(x.batch(), x.channels(), x.time());
  const S* xp = x.data();
  S* yp = y.data();
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) yp[i] = xp[i] > S(0) ? xp[i] : S(0);
  return y;
}

template <typename S>
Tensor<S> relu_backward(const Tensor<S>& x, const Tensor<S>& dy) {
  NMM_CHECK(x.same_shape(dy), ShapeError, "relu_backward: shape mismatch");
  Tensor<S> dx(x.batch(), x.channels(), x.time());
  const S* xp = x.data();
  const S* dp = dy.data();
  S* op = dx.data();
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) op[i] = xp[i] > S(0) ? dp[i] : S(0);
  return dx;
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
  Tensor<S> y(x.batch(), x.channels(), x.time());
  const S* xp = x.data();
  S* yp = y.data();
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) {
    const double v = static_cast<double>(xp[i]);
    if (v >= 0.0) {
      yp[i] = static_cast<S>(1.0 / (1.0 + std::exp(-v)));
    } else {
      const double e = std::exp(v);
      yp[i] = static_cast<S>(e / (1.0 + e));
    }
  }
  return y;
}

template <typename S>
Tensor<S> sigmoid_backward(const Tensor<S>& y, const Tensor<S>& dy) {
  NMM_CHECK(y.same_shape(dy), ShapeError, "sigmoid_backward: shape mismatch");
  Tensor<S> dx(y.batch(), y.channels(), y.time());
  const S* yp = y.data();
  const S* dp = dy.data();
  S* op = dx.data();
  const int64_t n = y.size();
  for (int64_t i = 0; i < n; ++i) op[i] = dp[i] * yp[i] * (S(1) - yp[i]);
  return dx;
}

template <typename S>
Tensor<S> add(const Tensor<S>& x, const Tensor<S>& y) {
  if (x.same_shape(y)) {
    Tensor<S> out(x.batch(), x.channels(), x.time());
    const S* a = x.data();
    const S* b = y.data();
    S* o = out.data();
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) o[i] = a[i] + b[i];
    return out;
  }
  NMM_CHECK(y.batch() == x.batch() && y.channels() == x.channels() &&
                y.time() == 1,
            ShapeError,
            "add: shapes (" << x.batch() << "," << x.channels() << ","
                            << x.time() << ") and (" << y.batch() << ","
                            << y.channels() << "," << y.time()
                            << ") are neither equal nor (B,C,1) broadcast");
  Tensor<S> out(x.batch(), x.channels(), x.time());
  for (int64_t b = 0; b < x.batch(); ++b) {
    for (int64_t c = 0; c < x.channels(); ++c) {
      const S bias = y.at(b, c, 0);
      const S* xrow = x.row(b, c);
      S* orow = out.row(b, c);
      for (int64_t t = 0; t < x.time(); ++t) orow[t] = xrow[t] + bias;
    }
  }
  return out;
}

template <typename S>
Tensor<S> sum_over_time(const Tensor<S>& g) {
  Tensor<S> out(g.batch(), g.channels(), 1);
  for (int64_t b = 0; b < g.batch(); ++b) {
    for (int64_t c = 0; c < g.channels(); ++c) {
      const S* row = g.row(b, c);
      S acc = 0;
      for (int64_t t = 0; t < g.time(); ++t) acc += row[t];
      out.at(b, c, 0) = acc;
    }
  }
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S s) {
  Tensor<S> y(x.batch(), x.channels(), x.time());
  const S* xp = x.data();
  S* yp = y.data();
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) yp[i] = xp[i] * s;
  return y;
}

template <typename S>
Tensor<S> channel_scale(const Tensor<S>& x, const Tensor<S>& s) {
  NMM_CHECK(s.batch() == x.batch() && s.channels() == x.channels() &&
                s.time() == 1,
            ShapeError, "channel_scale: gains must be (B,C,1)");
  Tensor<S> y(x.batch(), x.channels(), x.time());
  for (int64_t b = 0; b < x.batch(); ++b) {
    for (int64_t c = 0; c < x.channels(); ++c) {
      const S gain = s.at(b, c, 0);
      const S* xrow = x.row(b, c);
      S* yrow = y.row(b, c);
      for (int64_t t = 0; t < x.time(); ++t) yrow[t] = xrow[t] * gain;
    }
  }
  return y;
}

template <typename S>
void channel_scale_backward(const Tensor<S>& x, const Tensor<S>& s,
                            const Tensor<S>& dy, Tensor<S>* dx, Tensor<S>* ds) {
  NMM_CHECK(dy.same_shape(x), ShapeError, "channel_scale_backward: shape mismatch");
  if (dx != nullptr && !dx->same_shape(x))
    *dx = Tensor<S>(x.batch(), x.channels(), x.time());
  for (int64_t b = 0; b < x.batch(); ++b) {
    for (int64_t c = 0; c < x.channels(); ++c) {
      const S gain = s.at(b, c, 0);
      const S* xrow = x.row(b, c);
      const S* dyrow = dy.row(b, c);
      S acc = 0;
      S* dxrow = dx != nullptr ? dx->row(b, c) : nullptr;
      for (int64_t t = 0; t < x.time(); ++t) {
        if (dxrow != nullptr) dxrow[t] += dyrow[t] * gain;
        acc += dyrow[t] * xrow[t];
      }
      if (ds != nullptr) ds->at(b, c, 0) += acc;
    }
  }
}

template <typename S>
Tensor<S> global_avg_pool_time(const Tensor<S>& x) {
  Tensor<S> y(x.batch(), x.channels(), 1);
  const double inv_t = 1.0 / static_cast<double>(x.time());
  for (int64_t b = 0; b < x.batch(); ++b) {
    for (int64_t c = 0; c < x.channels(); ++c) {
      const S* row = x.row(b, c);
      double acc = 0.0;
      for (int64_t t = 0; t < x.time(); ++t) acc += static_cast<double>(row[t]);
      y.at(b, c, 0) = static_cast<S>(acc * inv_t);
    }
  }
  return y;
}

template <typename S>
Tensor<S> global_avg_pool_time_backward(const Tensor<S>& dy, int64_t time) {
  NMM_CHECK(dy.time() == 1, ShapeError,
            "global_avg_pool_time_backward: upstream gradient must be (B,C,1)");
  Tensor<S> dx(dy.batch(), dy.channels(), time);
  const S inv_t = static_cast<S>(1.0 / static_cast<double>(time));
  for (int64_t b = 0; b < dy.batch(); ++b) {
    for (int64_t c = 0; c < dy.channels(); ++c) {
      const S v = dy.at(b, c, 0) * inv_t;
      S* row = dx.row(b, c);
      for (int64_t t = 0; t < time; ++t) row[t] = v;
    }
  }
  return dx;
}

template <typename S>
Tensor<S> log_softmax_channels(const Tensor<S>& x) {
  Tensor<S> y(x.batch(), x.channels(), x.time());
  const int64_t cs = x.channels();
  const int64_t ts = x.time();
  for (int64_t b = 0; b < x.batch(); ++b) {
    for (int64_t t = 0; t < ts; ++t) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int64_t c = 0; c < cs; ++c)
        mx = std::max(mx, static_cast<double>(x.at(b, c, t)));
      double lse = 0.0;
      for (int64_t c = 0; c < cs; ++c)
        lse += std::exp(static_cast<double>(x.at(b, c, t)) - mx);
      lse = std::log(lse) + mx;
      for (int64_t c = 0; c < cs; ++c)
        y.at(b, c, t) = static_cast<S>(static_cast<double>(x.at(b, c, t)) - lse);
    }
  }
  return y;
}

template <typename S>
Tensor<S> log_softmax_channels_backward(const Tensor<S>& y, const Tensor<S>& dy) {
  NMM_CHECK(y.same_shape(dy), ShapeError,
            "log_softmax_channels_backward: shape mismatch");
  Tensor<S> dx(y.batch(), y.channels(), y.time());
  const int64_t cs = y.channels();
  for (int64_t b = 0; b < y.batch(); ++b) {
    for (int64_t t = 0; t < y.time(); ++t) {
      double dsum = 0.0;
      for (int64_t c = 0; c < cs; ++c) dsum += static_cast<double>(dy.at(b, c, t));
      for (int64_t c = 0; c < cs; ++c) {
        const double p = std::exp(static_cast<double>(y.at(b, c, t)));
        dx.at(b, c, t) =
            static_cast<S>(static_cast<double>(dy.at(b, c, t)) - p * dsum);
      }
    }
  }
  return dx;
}

template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double p, Rng& rng, bool training,
                  Tensor<S>* mask) {
  NMM_CHECK(p >= 0.0 && p < 1.0, ConfigError,
            "dropout: p must be in [0, 1), got " << p);
  if (!training || p == 0.0) {
    if (mask != nullptr) *mask = Tensor<S>();
    return x;
  }
  Tensor<S> y(x.batch(), x.channels(), x.time());
  Tensor<S> m(x.batch(), x.channels(), x.time());
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  const S* xp = x.data();
  S* yp = y.data();
  S* mp = m.data();
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) {
    const S g = rng.bernoulli(p) ? S(0) : keep_scale;
    mp[i] = g;
    yp[i] = xp[i] * g;
  }
  if (mask != nullptr) *mask = std::move(m);
  return y;
}

template <typename S>
Tensor<S> dropout_backward(const Tensor<S>& mask, const Tensor<S>& dy) {
  if (mask.empty()) return dy;  // identity forward
  NMM_CHECK(mask.same_shape(dy), ShapeError, "dropout_backward: shape mismatch");
  Tensor<S> dx(dy.batch(), dy.channels(), dy.time());
  const S* mp = mask.data();
  const S* dp = dy.data();
  S* op = dx.data();
  const int64_t n = dy.size();
  for (int64_t i = 0; i < n; ++i) op[i] = dp[i] * mp[i];
  return dx;
}

template <typename S>
Tensor<S> batchnorm_train(const Tensor<S>& x, const Tensor<S>& gamma,
                          const Tensor<S>& beta, double eps, double momentum,
                          Tensor<S>* running_mean, Tensor<S>* running_var,
                          BatchNormCache<S>* cache) {
  const int64_t cs = x.channels();
  NMM_CHECK(gamma.channels() == cs && beta.channels() == cs, ShapeError,
            "batchnorm: parameter channels " << gamma.channels()
                                             << " do not match input " << cs);
  const int64_t n = x.batch() * x.time();
  Tensor<S> y(x.batch(), cs, x.time());
  Tensor<S> x_hat(x.batch(), cs, x.time());
  std::vector<double> inv_std(static_cast<size_t>(cs));

  for (int64_t c = 0; c < cs; ++c) {
    double mean = 0.0;
    for (int64_t b = 0; b < x.batch(); ++b) {
      const S* row = x.row(b, c);
      for (int64_t t = 0; t < x.time(); ++t) mean += static_cast<double>(row[t]);
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t b = 0; b < x.batch(); ++b) {
      const S* row = x.row(b, c);
      for (int64_t t = 0; t < x.time(); ++t) {
        const double d = static_cast<double>(row[t]) - mean;
        var += d * d;
      }
    }
    var /= static_cast<double>(n);

    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(c)] = istd;
    const double g = static_cast<double>(gamma.at(0, c, 0));
    const double sh = static_cast<double>(beta.at(0, c, 0));
    for (int64_t b = 0; b < x.batch(); ++b) {
      const S* row = x.row(b, c);
      S* xh = x_hat.row(b, c);
      S* yr = y.row(b, c);
      for (int64_t t = 0; t < x.time(); ++t) {
        const double h = (static_cast<double>(row[t]) - mean) * istd;
        xh[t] = static_cast<S>(h);
        yr[t] = static_cast<S>(g * h + sh);
      }
    }
    if (running_mean != nullptr) {
      running_mean->at(0, c, 0) = static_cast<S>(
          (1.0 - momentum) * static_cast<double>(running_mean->at(0, c, 0)) +
          momentum * mean);
    }
    if (running_var != nullptr) {
      running_var->at(0, c, 0) = static_cast<S>(
          (1.0 - momentum) * static_cast<double>(running_var->at(0, c, 0)) +
          momentum * var);
    }
  }
  if (cache != nullptr) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
    cache->training = true;
  }
  return y;
}

template <typename S>
Tensor<S> batchnorm_eval(const Tensor<S>& x, const Tensor<S>& gamma,
                         const Tensor<S>& beta, double eps,
                         const Tensor<S>& running_mean,
                         const Tensor<S>& running_var,
                         BatchNormCache<S>* cache) {
  const int64_t cs = x.channels();
  NMM_CHECK(gamma.channels() == cs && beta.channels() == cs, ShapeError,
            "batchnorm: parameter channels " << gamma.channels()
                                             << " do not match input " << cs);
  Tensor<S> y(x.batch(), cs, x.time());
  Tensor<S> x_hat(x.batch(), cs, x.time());
  std::vector<double> inv_std(static_cast<size_t>(cs));
  for (int64_t c = 0; c < cs; ++c) {
    const double mean = static_cast<double>(running_mean.at(0, c, 0));
    const double var = static_cast<double>(running_var.at(0, c, 0));
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(c)] = istd;
    const double g = static_cast<double>(gamma.at(0, c, 0));
    const double sh = static_cast<double>(beta.at(0, c, 0));
    for (int64_t b = 0; b < x.batch(); ++b) {
      const S* row = x.row(b, c);
      S* xh = x_hat.row(b, c);
      S* yr = y.row(b, c);
      for (int64_t t = 0; t < x.time(); ++t) {
        const double h = (static_cast<double>(row[t]) - mean) * istd;
        xh[t] = static_cast<S>(h);
        yr[t] = static_cast<S>(g * h + sh);
      }
    }
  }
  if (cache != nullptr) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
    cache->training = false;
  }
  return y;
}

template <typename S>
void batchnorm_backward(const BatchNormCache<S>& cache, const Tensor<S>& gamma,
                        const Tensor<S>& dy, Tensor<S>* dx, Tensor<S>* dgamma,
                        Tensor<S>* dbeta) {
  const Tensor<S>& x_hat = cache.x_hat;
  NMM_CHECK(x_hat.same_shape(dy), ShapeError, "batchnorm_backward: shape mismatch");
  const int64_t cs = dy.channels();
  const int64_t n = dy.batch() * dy.time();
  if (dx != nullptr && !dx->same_shape(dy))
    *dx = Tensor<S>(dy.batch(), cs, dy.time());

  for (int64_t c = 0; c < cs; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int64_t b = 0; b < dy.batch(); ++b) {
      const S* dyr = dy.row(b, c);
      const S* xh = x_hat.row(b, c);
      for (int64_t t = 0; t < dy.time(); ++t) {
        sum_dy += static_cast<double>(dyr[t]);
        sum_dy_xhat += static_cast<double>(dyr[t]) * static_cast<double>(xh[t]);
      }
    }
    if (dgamma != nullptr)
      dgamma->at(0, c, 0) += static_cast<S>(sum_dy_xhat);
    if (dbeta != nullptr) dbeta->at(0, c, 0) += static_cast<S>(sum_dy);
    if (dx == nullptr) continue;

    const double g = static_cast<double>(gamma.at(0, c, 0));
    const double istd = cache.inv_std[static_cast<size_t>(c)];
    if (cache.training) {
      const double k = g * istd / static_cast<double>(n);
      for (int64_t b = 0; b < dy.batch(); ++b) {
        const S* dyr = dy.row(b, c);
        const S* xh = x_hat.row(b, c);
        S* dxr = dx->row(b, c);
        for (int64_t t = 0; t < dy.time(); ++t) {
          dxr[t] += static_cast<S>(
              k * (static_cast<double>(n) * static_cast<double>(dyr[t]) -
                   sum_dy - static_cast<double>(xh[t]) * sum_dy_xhat));
        }
      }
    } else {
      const double k = g * istd;
      for (int64_t b = 0; b < dy.batch(); ++b) {
        const S* dyr = dy.row(b, c);
        S* dxr = dx->row(b, c);
        for (int64_t t = 0; t < dy.time(); ++t)
          dxr[t] += static_cast<S>(k * static_cast<double>(dyr[t]));
      }
    }
  }
}

#define NMM_INSTANTIATE_OPS(S)                                                 \
  template Tensor<S> conv1d(const Tensor<S>&, const Tensor<S>&,               \
                            const ConvSpec&);                                  \
  template void conv1d_backward(const Tensor<S>&, const Tensor<S>&,           \
                                const ConvSpec&, const Tensor<S>&,            \
                                Tensor<S>*, Tensor<S>*);                       \
  template Tensor<S> relu(const Tensor<S>&);                                   \
  template Tensor<S> relu_backward(const Tensor<S>&, const Tensor<S>&);        \
  template Tensor<S> sigmoid(const Tensor<S>&);                                \
  template Tensor<S> sigmoid_backward(const Tensor<S>&, const Tensor<S>&);     \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                  \
  template Tensor<S> sum_over_time(const Tensor<S>&);                          \
  template Tensor<S> scale(const Tensor<S>&, S);                               \
  template Tensor<S> channel_scale(const Tensor<S>&, const Tensor<S>&);        \
  template void channel_scale_backward(const Tensor<S>&, const Tensor<S>&,     \
                                       const Tensor<S>&, Tensor<S>*,           \
                                       Tensor<S>*);                            \
  template Tensor<S> global_avg_pool_time(const Tensor<S>&);                   \
  template Tensor<S> global_avg_pool_time_backward(const Tensor<S>&, int64_t); \
  template Tensor<S> log_softmax_channels(const Tensor<S>&);                   \
  template Tensor<S> log_softmax_channels_backward(const Tensor<S>&,           \
                                                   const Tensor<S>&);          \
  template Tensor<S> dropout(const Tensor<S>&, double, Rng&, bool,             \
                             Tensor<S>*);                                      \
  template Tensor<S> dropout_backward(const Tensor<S>&, const Tensor<S>&);     \
  template Tensor<S> batchnorm_train(const Tensor<S>&, const Tensor<S>&,       \
                                     const Tensor<S>&, double, double,         \
                                     Tensor<S>*, Tensor<S>*,                   \
                                     BatchNormCache<S>*);                      \
  template Tensor<S> batchnorm_eval(const Tensor<S>&, const Tensor<S>&,        \
                                    const Tensor<S>&, double,                  \
                                    const Tensor<S>&, const Tensor<S>&,        \
                                    BatchNormCache<S>*);                       \
  template void batchnorm_backward(const BatchNormCache<S>&, const Tensor<S>&, \
                                   const Tensor<S>&, Tensor<S>*, Tensor<S>*,   \
                                   Tensor<S>*);

NMM_INSTANTIATE_OPS(float)
NMM_INSTANTIATE_OPS(double)

#undef NMM_INSTANTIATE_OPS

}  // namespace ops
}  // namespace nmm
