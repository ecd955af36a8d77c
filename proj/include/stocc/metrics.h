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
#ifndef STOCC_METRICS_H_
#define STOCC_METRICS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "stocc/geometry.h"
#include "stocc/memory.h"

namespace stocc {

struct ClassSet {
  int num_classes = 18;
  int free_class = 17;
};

struct IouReport {
  std::vector<std::int64_t> tp, fp, fn;
  // IoU per class; nullopt when the class never appears in either input.
  std::vector<std::optional<double>> per_class;
  // Mean over present non-free classes; 0 when there are none.
  double mean = 0.0;
  int present_classes = 0;
};

// Confusion counts accumulated over frames.
class IouAccumulator {
 public:
  explicit IouAccumulator(const ClassSet& classes);

  // Voxels with mask == 0 are skipped when a mask is given. Throws
  // InvalidArgumentError on a size mismatch or an out-of-range label.
  void Add(const LabelGrid& prediction, const LabelGrid& ground_truth,
           const LabelGrid* mask = nullptr);
  IouReport Compute() const;

 private:
  ClassSet classes_;
  std::vector<std::int64_t> tp_, fp_, fn_;
};

// masks may be empty when apply_mask is false.
IouReport Miou(std::span<const LabelGrid> predictions,
               std::span<const LabelGrid> ground_truths,
               std::span<const LabelGrid> masks, bool apply_mask,
               const ClassSet& classes);

struct StcvCounts {
  std::int64_t flips = 0;    // current != Free, memory != Free, differ
  std::int64_t non_free = 0;  // current != Free
  std::vector<std::int64_t> flips_by_class;  // indexed by the memory class

  // flips / non_free, or 0 for an empty frame.
  double value() const;
};

// Counts over frame-aligned label grids. `memory_prediction` is the memory's
// previous prediction read at each current voxel.
StcvCounts CountStcv(const LabelGrid& memory_prediction,
                     const LabelGrid& current, const LabelGrid* visibility,
                     const ClassSet& classes);

// Reads the memory's prediction plane at `pose` (nearest neighbor) and
// counts against `current`. With apply_mask, both counts are restricted to
// visible voxels.
StcvCounts StcvFrame(const SceneMemory& mem, const Pose& pose,
                     const LabelGrid& current, const LabelGrid* visibility,
                     bool apply_mask);

// Per-frame STCV with and without the visibility mask.
class ConsistencyLedger {
 public:
  ConsistencyLedger() : ConsistencyLedger(18) {}
  explicit ConsistencyLedger(int num_classes);

  void AddFrame(const StcvCounts& masked, const StcvCounts& unmasked);

  std::span<const double> stcv(bool masked) const {
    return masked ? masked_ : unmasked_;
  }
  std::span<const std::int64_t> flips_by_class(bool masked) const {
    return masked ? masked_flips_ : unmasked_flips_;
  }
  std::size_t frames() const { return masked_.size(); }
  double Mstcv(bool masked) const;

 private:
  std::vector<double> masked_, unmasked_;
  std::vector<std::int64_t> masked_flips_, unmasked_flips_;
};

// Arithmetic mean; 0 for an empty span.
double Mstcv(std::span<const double> stcv);

// method flips / baseline flips per class. nullopt where the baseline has no
// flips for that class.
std::vector<std::optional<double>> RelativeClassStcv(
    const ConsistencyLedger& method, const ConsistencyLedger& baseline,
    bool masked);

// current_vis OR (historically visible AND NOT dynamic), all frame-aligned.
LabelGrid ExtendedEvalScope(const LabelGrid& current_visibility,
                            const SceneMemory& mem, const Pose& pose,
                            const LabelGrid& dynamic_mask);

}  // namespace stocc

#endif  // STOCC_METRICS_H_
