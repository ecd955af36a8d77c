/* Copyright 2026 The stocc Authors. All Rights Reserved.

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
#include "stocc/common.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace stocc {

namespace {
std::atomic<int> worker_limit{0};
}  // namespace

ScopedWorkerLimit::ScopedWorkerLimit(int limit)
    : previous_(worker_limit.exchange(limit)) {}

ScopedWorkerLimit::~ScopedWorkerLimit() { worker_limit.store(previous_); }

int WorkerCount() {
  int count = static_cast<int>(std::thread::hardware_concurrency());
  if (count <= 0) count = 1;
  if (const int limit = worker_limit.load(); limit >= 1) count = std::min(count, limit);
  if (const char* env = std::getenv("STOCC_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) count = std::min(count, cap);
  }
  return count;
}

void ParallelFor(std::int64_t begin, std::int64_t end,
                 const std::function<void(std::int64_t)>& fn) {
  const std::int64_t n = end - begin;
  if (n <= 0) return;
  const std::int64_t workers =
      std::min<std::int64_t>(WorkerCount(), std::max<std::int64_t>(1, n / 256));
  if (workers <= 1) {
    for (std::int64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (std::int64_t w = 0; w < workers; ++w) {
    const std::int64_t lo = begin + w * chunk;
    const std::int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([lo, hi, &fn] {
      for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

double PairwiseSum(std::span<const double> values) {
  if (values.empty()) return 0.0;
  if (values.size() == 1) return values[0];
  const std::size_t half = values.size() / 2;
  return PairwiseSum(values.first(half)) + PairwiseSum(values.subspan(half));
}

}  // namespace stocc
