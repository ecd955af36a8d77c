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
#ifndef STOCC_BENCH_H_
#define STOCC_BENCH_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stocc/geometry.h"
#include "stocc/paradigm.h"

namespace stocc {

struct BenchConfig {
  std::vector<Paradigm> paradigms = {Paradigm::kRecurrent, Paradigm::kStacked,
                                     Paradigm::kUnified};
  std::vector<int> k_list = {4, 8, 16, 40};
  GridSpec grid = DefaultBenchGrid();
  int repeats = 3;
  // Timed frames per run; all of them have a full k-frame history.
  int measured_frames = 4;
  // Ego translation per frame, in voxels along x.
  double step_voxels = 1.25;
  std::uint64_t seed = 0;

  // 50 x 50 x 4 at 0.4 m with 16 channels.
  static GridSpec DefaultBenchGrid();
};

struct BenchRow {
  Paradigm paradigm = Paradigm::kUnified;
  int k = 1;
  std::size_t peak_history_bytes = 0;
  double mean_fuse_ms = 0.0;  // over measured frames and repeats
};

// Runs every paradigm x k with the averaging fuse-op on random features,
// timing on a single worker. Throws InvalidArgumentError for an empty k_list,
// k < 1 or repeats < 1.
std::vector<BenchRow> RunBenchmark(const BenchConfig& config);

// paradigm,k,peak_history_bytes,mean_fuse_ms. Without timing the last
// column is dropped so the output is reproducible byte for byte.
std::string BenchCsv(std::span<const BenchRow> rows, bool include_timing = true);
// Two panels (storage and fusion time against k), one polyline per paradigm.
std::string BenchSvg(std::span<const BenchRow> rows);

// Coefficient of determination of the least-squares line through (x, y).
// 1 when y is constant and exactly fit.
double LinearFitR2(std::span<const double> x, std::span<const double> y);

}  // namespace stocc

#endif  // STOCC_BENCH_H_
