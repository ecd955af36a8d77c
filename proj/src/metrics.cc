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
#include "stocc/metrics.h"

#include <algorithm>
#include <string>

#include "stocc/common.h"

namespace stocc {
namespace {

void CheckSameCells(const LabelGrid& a, const LabelGrid& b, const char* what) {
  if (a.spec().dims != b.spec().dims) {
    throw InvalidArgumentError(std::string(what) + ": grid dims differ");
  }
}

}  // namespace

IouAccumulator::IouAccumulator(const ClassSet& classes)
    : classes_(classes),
      tp_(classes.num_classes, 0),
      fp_(classes.num_classes, 0),
      fn_(classes.num_classes, 0) {
  if (classes.num_classes < 1 || classes.free_class < 0 ||
      classes.free_class >= classes.num_classes) {
    throw InvalidArgumentError("invalid class set");
  }
}

void IouAccumulator::Add(const LabelGrid& prediction,
                         const LabelGrid& ground_truth, const LabelGrid* mask) {
  CheckSameCells(prediction, ground_truth, "miou");
  if (mask) CheckSameCells(prediction, *mask, "miou mask");
  const int n = classes_.num_classes;
  for (std::int64_t i = 0; i < prediction.Cells(); ++i) {
    if (mask && (*mask)[i] == 0) continue;
    const int p = prediction[i];
    const int g = ground_truth[i];
    if (p >= n || g >= n) {
      throw InvalidArgumentError("label " + std::to_string(std::max(p, g)) +
                                 " outside [0, " + std::to_string(n) + ")");
    }
    if (p == g) {
      ++tp_[p];
    } else {
      ++fp_[p];
      ++fn_[g];
    }
  }
}

IouReport IouAccumulator::Compute() const {
  IouReport r;
  r.tp = tp_;
  r.fp = fp_;
  r.fn = fn_;
  r.per_class.resize(classes_.num_classes);
  double sum = 0.0;
  for (int c = 0; c < classes_.num_classes; ++c) {
    const std::int64_t uni = tp_[c] + fp_[c] + fn_[c];
    if (uni == 0) continue;
    const double iou = static_cast<double>(tp_[c]) / static_cast<double>(uni);
    r.per_class[c] = iou;
    if (c == classes_.free_class) continue;
    sum += iou;
    ++r.present_classes;
  }
  r.mean = r.present_classes > 0 ? sum / r.present_classes : 0.0;
  return r;
}

IouReport Miou(std::span<const LabelGrid> predictions,
               std::span<const LabelGrid> ground_truths,
               std::span<const LabelGrid> masks, bool apply_mask,
               const ClassSet& classes) {
  if (predictions.size() != ground_truths.size()) {
    throw InvalidArgumentError("miou: prediction/ground-truth frame counts differ");
  }
  if (apply_mask && masks.size() != predictions.size()) {
    throw InvalidArgumentError("miou: one mask per frame is required");
  }
  IouAccumulator acc(classes);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    acc.Add(predictions[i], ground_truths[i], apply_mask ? &masks[i] : nullptr);
  }
  return acc.Compute();
}

double StcvCounts::value() const {
  return non_free == 0 ? 0.0
                       : static_cast<double>(flips) / static_cast<double>(non_free);
}

StcvCounts CountStcv(const LabelGrid& memory_prediction,
                     const LabelGrid& current, const LabelGrid* visibility,
                     const ClassSet& classes) {
  CheckSameCells(memory_prediction, current, "stcv");
  if (visibility) CheckSameCells(current, *visibility, "stcv visibility");
  StcvCounts out;
  out.flips_by_class.assign(classes.num_classes, 0);
  const int free = classes.free_class;
  for (std::int64_t i = 0; i < current.Cells(); ++i) {
    if (visibility && (*visibility)[i] == 0) continue;
    const int cur = current[i];
    if (cur == free) continue;
    ++out.non_free;
    const int prev = memory_prediction[i];
    if (prev != free && prev != cur) {
      ++out.flips;
      if (prev < classes.num_classes) ++out.flips_by_class[prev];
    }
  }
  return out;
}

StcvCounts StcvFrame(const SceneMemory& mem, const Pose& pose,
                     const LabelGrid& current, const LabelGrid* visibility,
                     bool apply_mask) {
  if (apply_mask && !visibility) {
    throw InvalidArgumentError("stcv: apply_mask requires a visibility grid");
  }
  const LabelGrid previous =
      ExtractLabels(mem, pose, current.spec(), LabelPlane::kPrediction);
  const ClassSet classes{mem.layout().num_classes, mem.layout().free_class};
  return CountStcv(previous, current, apply_mask ? visibility : nullptr, classes);
}

ConsistencyLedger::ConsistencyLedger(int num_classes)
    : masked_flips_(num_classes, 0), unmasked_flips_(num_classes, 0) {}

void ConsistencyLedger::AddFrame(const StcvCounts& masked,
                                 const StcvCounts& unmasked) {
  masked_.push_back(masked.value());
  unmasked_.push_back(unmasked.value());
  for (std::size_t c = 0; c < masked_flips_.size(); ++c) {
    if (c < masked.flips_by_class.size()) masked_flips_[c] += masked.flips_by_class[c];
    if (c < unmasked.flips_by_class.size()) {
      unmasked_flips_[c] += unmasked.flips_by_class[c];
    }
  }
}

double ConsistencyLedger::Mstcv(bool masked) const {
  return stocc::Mstcv(stcv(masked));
}

double Mstcv(std::span<const double> stcv) {
  if (stcv.empty()) return 0.0;
  double sum = 0.0;
  for (double v : stcv) sum += v;
  return sum / static_cast<double>(stcv.size());
}

std::vector<std::optional<double>> RelativeClassStcv(
    const ConsistencyLedger& method, const ConsistencyLedger& baseline,
    bool masked) {
  const auto m = method.flips_by_class(masked);
  const auto b = baseline.flips_by_class(masked);
  if (m.size() != b.size()) {
    throw InvalidArgumentError("ledgers have different class counts");
  }
  std::vector<std::optional<double>> out(m.size());
  for (std::size_t c = 0; c < m.size(); ++c) {
    if (b[c] == 0) continue;
    out[c] = static_cast<double>(m[c]) / static_cast<double>(b[c]);
  }
  return out;
}

LabelGrid ExtendedEvalScope(const LabelGrid& current_visibility,
                            const SceneMemory& mem, const Pose& pose,
                            const LabelGrid& dynamic_mask) {
  CheckSameCells(current_visibility, dynamic_mask, "extended scope");
  const LabelGrid history = ExtractLabels(mem, pose, current_visibility.spec(),
                                          LabelPlane::kHistoryVisible);
  LabelGrid out = current_visibility;
  for (std::int64_t i = 0; i < out.Cells(); ++i) {
    const bool keep = current_visibility[i] != 0 ||
                      (history[i] != 0 && dynamic_mask[i] == 0);
    out[i] = keep ? 1 : 0;
  }
  return out;
}

}  // namespace stocc
