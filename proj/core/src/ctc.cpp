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
#include "nmm/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nmm/check.hpp"

namespace nmm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// Blank-extended label at position u (0-based): blanks at even positions.
int32_t extended_label(const CtcTarget& target, int64_t u) {
  return (u % 2 == 0) ? target.blank_id : target.labels[static_cast<size_t>(u / 2)];
}

void validate_target(const CtcTarget& target, int64_t channels) {
  NMM_CHECK(target.blank_id == channels - 1, ConfigError,
            "ctc: blank_id must be the last channel (" << channels - 1
                                                       << "), got "
                                                       << target.blank_id);
  for (const int32_t l : target.labels) {
    NMM_CHECK(l >= 0 && l < target.blank_id, ConfigError,
              "ctc: label " << l << " outside [0, " << target.blank_id << ")");
  }
}

}  // namespace

int64_t ctc_min_frames(const CtcTarget& target) {
  int64_t repeats = 0;
  for (size_t i = 1; i < target.labels.size(); ++i)
    if (target.labels[i] == target.labels[i - 1]) ++repeats;
  return static_cast<int64_t>(target.labels.size()) + repeats;
}

template <typename S>
CtcResult<S> ctc_loss(const Tensor<S>& log_probs,
                      const std::vector<CtcTarget>& targets,
                      const std::vector<int64_t>* frame_lengths) {
  const int64_t nb = log_probs.batch();
  const int64_t channels = log_probs.channels();
  const int64_t t_max = log_probs.time();
  NMM_CHECK(static_cast<int64_t>(targets.size()) == nb, ShapeError,
            "ctc: got " << targets.size() << " targets for batch " << nb);
  NMM_CHECK(frame_lengths == nullptr ||
                static_cast<int64_t>(frame_lengths->size()) == nb,
            ShapeError, "ctc: frame_lengths size mismatch");

  CtcResult<S> result;
  result.grad = Tensor<S>(nb, channels, t_max);
  result.item_loss.assign(static_cast<size_t>(nb), 0.0);
  result.item_feasible.assign(static_cast<size_t>(nb), 0);

  int64_t feasible_count = 0;
  for (int64_t b = 0; b < nb; ++b) {
    const CtcTarget& target = targets[static_cast<size_t>(b)];
    validate_target(target, channels);
    const int64_t t_len = frame_lengths != nullptr ? (*frame_lengths)[static_cast<size_t>(b)] : t_max;
    NMM_CHECK(t_len >= 1 && t_len <= t_max, ShapeError,
              "ctc: frame length " << t_len << " outside [1, " << t_max << "]");
    if (ctc_min_frames(target) > t_len) {
      result.item_loss[static_cast<size_t>(b)] =
          std::numeric_limits<double>::infinity();
      continue;
    }
    result.item_feasible[static_cast<size_t>(b)] = 1;
    ++feasible_count;

    const int64_t ext = 2 * static_cast<int64_t>(target.labels.size()) + 1;
    auto lp = [&](int64_t u, int64_t t) {
      return static_cast<double>(log_probs.at(b, extended_label(target, u), t));
    };

    // Forward variables, frame emissions included.
    std::vector<double> alpha(static_cast<size_t>(ext * t_len), kNegInf);
    auto a = [&](int64_t t, int64_t u) -> double& {
      return alpha[static_cast<size_t>(t * ext + u)];
    };
    a(0, 0) = lp(0, 0);
    if (ext > 1) a(0, 1) = lp(1, 0);
    for (int64_t t = 1; t < t_len; ++t) {
      // Positions reachable at frame t given the remaining frames.
      const int64_t u_lo = std::max<int64_t>(0, ext - 2 * (t_len - t));
      const int64_t u_hi = std::min<int64_t>(ext - 1, 2 * (t + 1) - 1);
      for (int64_t u = u_lo; u <= u_hi; ++u) {
        double acc = a(t - 1, u);
        if (u >= 1) acc = log_add(acc, a(t - 1, u - 1));
        if (u >= 2 && extended_label(target, u) != target.blank_id &&
            extended_label(target, u) != extended_label(target, u - 2)) {
          acc = log_add(acc, a(t - 1, u - 2));
        }
        a(t, u) = acc == kNegInf ? kNegInf : acc + lp(u, t);
      }
    }
    double log_p = a(t_len - 1, ext - 1);
    if (ext > 1) log_p = log_add(log_p, a(t_len - 1, ext - 2));

    // Backward variables, frame emissions included.
    std::vector<double> beta(static_cast<size_t>(ext * t_len), kNegInf);
    auto bt = [&](int64_t t, int64_t u) -> double& {
      return beta[static_cast<size_t>(t * ext + u)];
    };
    bt(t_len - 1, ext - 1) = lp(ext - 1, t_len - 1);
    if (ext > 1) bt(t_len - 1, ext - 2) = lp(ext - 2, t_len - 1);
    for (int64_t t = t_len - 2; t >= 0; --t) {
      const int64_t u_lo = std::max<int64_t>(0, ext - 2 * (t_len - t));
      const int64_t u_hi = std::min<int64_t>(ext - 1, 2 * (t + 1) - 1);
      for (int64_t u = u_hi; u >= u_lo; --u) {
        double acc = bt(t + 1, u);
        if (u + 1 < ext) acc = log_add(acc, bt(t + 1, u + 1));
        if (u + 2 < ext && extended_label(target, u + 2) != target.blank_id &&
            extended_label(target, u + 2) != extended_label(target, u)) {
          acc = log_add(acc, bt(t + 1, u + 2));
        }
        bt(t, u) = acc == kNegInf ? kNegInf : acc + lp(u, t);
      }
    }

    result.item_loss[static_cast<size_t>(b)] = -log_p;

    // d(-log p)/d logit(c, t) = softmax(c, t) - occupancy(c, t). alpha and
    // beta both include the frame-t emission, so one copy is divided out.
    for (int64_t t = 0; t < t_len; ++t) {
      std::vector<double> occ(static_cast<size_t>(channels), kNegInf);
      for (int64_t u = 0; u < ext; ++u) {
        const double ab = a(t, u) + bt(t, u);
        if (ab == kNegInf) continue;
        const int32_t c = extended_label(target, u);
        occ[static_cast<size_t>(c)] = log_add(
            occ[static_cast<size_t>(c)],
            ab - static_cast<double>(log_probs.at(b, c, t)));
      }
      for (int64_t c = 0; c < channels; ++c) {
        const double p_model =
            std::exp(static_cast<double>(log_probs.at(b, c, t)));
        const double p_occ =
            occ[static_cast<size_t>(c)] == kNegInf
                ? 0.0
                : std::exp(occ[static_cast<size_t>(c)] - log_p);
        result.grad.at(b, c, t) = static_cast<S>(p_model - p_occ);
      }
    }
  }

  if (feasible_count == 0) {
    result.loss = std::numeric_limits<double>::infinity();
    std::fill(result.grad.values().begin(), result.grad.values().end(), S(0));
    return result;
  }

  double total = 0.0;
  for (int64_t b = 0; b < nb; ++b) {
    if (result.item_feasible[static_cast<size_t>(b)])
      total += result.item_loss[static_cast<size_t>(b)];
  }
  result.loss = total / static_cast<double>(feasible_count);
  const S inv = static_cast<S>(1.0 / static_cast<double>(feasible_count));
  for (auto& g : result.grad.values()) g *= inv;
  return result;
}

template <typename S>
double ctc_brute_force(const Tensor<S>& log_probs, const CtcTarget& target,
                       int64_t batch_item, int64_t frames) {
  const int64_t channels = log_probs.channels();
  const int64_t t_len = frames < 0 ? log_probs.time() : frames;
  NMM_CHECK(t_len >= 1 && t_len <= log_probs.time(), ShapeError,
            "ctc_brute_force: bad frame count " << t_len);
  validate_target(target, channels);

  double paths = 1.0;
  for (int64_t t = 0; t < t_len; ++t) {
    paths *= static_cast<double>(channels);
    NMM_CHECK(paths <= 1e7, ConfigError,
              "ctc_brute_force: instance too large, (V+1)^T = "
                  << paths << " exceeds 1e7");
  }

  std::vector<int32_t> seq(static_cast<size_t>(t_len), 0);
  std::vector<int32_t> collapsed;
  collapsed.reserve(static_cast<size_t>(t_len));
  double total_log = kNegInf;
  while (true) {
    // Collapse: merge repeats, then drop blanks.
    collapsed.clear();
    for (int64_t t = 0; t < t_len; ++t) {
      if (t > 0 && seq[static_cast<size_t>(t)] == seq[static_cast<size_t>(t - 1)])
        continue;
      if (seq[static_cast<size_t>(t)] != target.blank_id)
        collapsed.push_back(seq[static_cast<size_t>(t)]);
    }
    if (collapsed == target.labels) {
      double lp = 0.0;
      for (int64_t t = 0; t < t_len; ++t) {
        lp += static_cast<double>(
            log_probs.at(batch_item, seq[static_cast<size_t>(t)], t));
      }
      total_log = log_add(total_log, lp);
    }
    // Odometer increment.
    int64_t pos = t_len - 1;
    while (pos >= 0) {
      if (++seq[static_cast<size_t>(pos)] < channels) break;
      seq[static_cast<size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return total_log == kNegInf ? std::numeric_limits<double>::infinity()
                              : -total_log;
}

template <typename S>
std::vector<std::vector<int32_t>> greedy_decode(
    const Tensor<S>& log_probs, const std::vector<int64_t>* frame_lengths) {
  const int64_t nb = log_probs.batch();
  const int64_t channels = log_probs.channels();
  const int32_t blank = static_cast<int32_t>(channels - 1);
  std::vector<std::vector<int32_t>> out(static_cast<size_t>(nb));
  for (int64_t b = 0; b < nb; ++b) {
    const int64_t t_len = frame_lengths != nullptr
                              ? (*frame_lengths)[static_cast<size_t>(b)]
                              : log_probs.time();
    int32_t prev = -1;
    for (int64_t t = 0; t < t_len; ++t) {
      int32_t best = 0;
      S best_v = log_probs.at(b, 0, t);
      for (int64_t c = 1; c < channels; ++c) {
        const S v = log_probs.at(b, c, t);
        if (v > best_v) {
          best_v = v;
          best = static_cast<int32_t>(c);
        }
      }
      if (best != prev && best != blank)
        out[static_cast<size_t>(b)].push_back(best);
      prev = best;
    }
  }
  return out;
}

double token_error_rate(std::span<const int32_t> hyp,
                        std::span<const int32_t> ref) {
  const size_t n = hyp.size();
  const size_t m = ref.size();
  std::vector<int64_t> prev(m + 1);
  std::vector<int64_t> cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int64_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[m]) /
         static_cast<double>(std::max<size_t>(1, m));
}

template CtcResult<float> ctc_loss(const Tensor<float>&,
                                   const std::vector<CtcTarget>&,
                                   const std::vector<int64_t>*);
template CtcResult<double> ctc_loss(const Tensor<double>&,
                                    const std::vector<CtcTarget>&,
                                    const std::vector<int64_t>*);
template double ctc_brute_force(const Tensor<float>&, const CtcTarget&, int64_t,
                                int64_t);
template double ctc_brute_force(const Tensor<double>&, const CtcTarget&,
                                int64_t, int64_t);
template std::vector<std::vector<int32_t>> greedy_decode(
    const Tensor<float>&, const std::vector<int64_t>*);
template std::vector<std::vector<int32_t>> greedy_decode(
    const Tensor<double>&, const std::vector<int64_t>*);

}  // namespace nmm
