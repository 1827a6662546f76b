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

#include <atomic>
#include <cstdint>
#include <future>
#include <vector>

namespace nmm {

// Runs fn(i) for i in [0, n). With threads > 1 the calls are distributed
// over a transient worker pool; fn must only touch state owned by index i.
// Callers that combine per-index results must reduce them in index order
// afterwards, which keeps results independent of the schedule.
template <typename Fn>
void parallel_indexed(int64_t n, int threads, const Fn& fn) {
  if (threads <= 1 || n <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(std::min<int64_t>(threads, n));
  std::atomic<int64_t> next{0};
  std::vector<std::future<void>> futures;
  futures.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&]() {
      for (int64_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    }));
  }
  for (auto& f : futures) f.get();
}

}  // namespace nmm
