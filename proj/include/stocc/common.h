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
#ifndef STOCC_COMMON_H_
#define STOCC_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>

namespace stocc {

// Caller supplied something malformed: bad shapes, out-of-range settings,
// unreadable files. The CLI maps these to exit code 2.
class InvalidArgumentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegeneratePoseError : public InvalidArgumentError {
 public:
  using InvalidArgumentError::InvalidArgumentError;
};

class IndexError : public InvalidArgumentError {
 public:
  using InvalidArgumentError::InvalidArgumentError;
};

class IoError : public InvalidArgumentError {
 public:
  using InvalidArgumentError::InvalidArgumentError;
};

// An internal invariant did not hold. The CLI maps these to exit code 3.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Number of worker threads for data-parallel voxel loops. Honors the
// STOCC_THREADS environment variable as an upper bound.
int WorkerCount();

// Caps WorkerCount() for the lifetime of the object (process wide). Used to
// pin timing runs to one lane.
class ScopedWorkerLimit {
 public:
  explicit ScopedWorkerLimit(int limit);
  ~ScopedWorkerLimit();
  ScopedWorkerLimit(const ScopedWorkerLimit&) = delete;
  ScopedWorkerLimit& operator=(const ScopedWorkerLimit&) = delete;

 private:
  int previous_;
};

// Runs fn(i) for i in [begin, end) split into contiguous chunks across
// WorkerCount() threads. fn must only write to disjoint outputs.
void ParallelFor(std::int64_t begin, std::int64_t end,
                 const std::function<void(std::int64_t)>& fn);

// Deterministic pairwise (tree) summation: the range is split in halves
// recursively, left half first, so the result does not depend on threading.
double PairwiseSum(std::span<const double> values);

}  // namespace stocc

#endif  // STOCC_COMMON_H_
