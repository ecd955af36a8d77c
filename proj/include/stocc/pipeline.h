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
#ifndef STOCC_PIPELINE_H_
#define STOCC_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stocc/geometry.h"
#include "stocc/memory.h"
#include "stocc/metrics.h"
#include "stocc/paradigm.h"
#include "stocc/simulator.h"

namespace stocc {

// Streams labelled frames through a label-only scene memory and accrues
// mIoU (current and extended scope) and STCV (masked and unmasked).
class SequenceEvaluator {
 public:
  // Voxels whose remembered ground truth is one of `dynamic_classes` are
  // left out of the extended scope along with the current dynamic mask.
  SequenceEvaluator(std::span<const Pose> trajectory, const GridSpec& frame_spec,
                    const ClassSet& classes, std::vector<int> dynamic_classes = {});

  // `dynamic_mask` may be null (treated as all static).
  void AddFrame(const Pose& pose, const LabelGrid& prediction,
                const LabelGrid& ground_truth, const LabelGrid& visibility,
                const LabelGrid* dynamic_mask);

  const ConsistencyLedger& ledger() const { return ledger_; }
  IouReport Iou(bool extended) const {
    return extended ? iou_extended_.Compute() : iou_.Compute();
  }
  const SceneMemory& memory() const { return mem_; }

 private:
  ClassSet classes_;
  std::vector<std::uint8_t> is_dynamic_;  // per class
  SceneMemory mem_;
  ConsistencyLedger ledger_;
  IouAccumulator iou_;
  IouAccumulator iou_extended_;
};

struct PipelineConfig {
  double alpha = 0.5;
  // Temporal window in frames: the model memory restarts every k frames.
  // 0 means the whole sequence; 1 disables temporal fusion.
  int k = 0;
  Paradigm paradigm = Paradigm::kUnified;
  // Unified only: run memory attention over the features. Predictions come
  // from the activation planes either way.
  bool use_attention = true;
  int num_layers = 3;
  int num_points = 4;
  std::uint64_t param_seed = 0;
  ClassSet classes;
  std::vector<int> dynamic_classes;
  // Keep per-frame fused predictions and inputs for evaluation dumps.
  bool keep_frames = false;
};

struct PipelineFrames {
  std::vector<Pose> poses;
  std::vector<LabelGrid> predictions, raw_predictions, ground_truth, visibility,
      dynamic_mask;
};

struct PipelineReport {
  int frames = 0;
  int k = 0;
  double alpha = 0.5;
  Paradigm paradigm = Paradigm::kUnified;
  double delta = 0.0;  // relative volume change of the scene memory
  ClassSet classes;
  ConsistencyLedger fused;
  ConsistencyLedger raw;
  IouReport iou, iou_extended, raw_iou;
  std::vector<double> mean_uncertainty;  // per frame, unified with attention
};

struct PipelineResult {
  PipelineReport report;
  SceneMemory memory;
  PipelineFrames frames;  // filled when keep_frames
};

// Per frame: extract, fuse features, predict from decayed activations
// (argmax of alpha * c_t + (1 - alpha) * c_hist where observed, else
// argmax c_t), decay-update, write back, evaluate. Errors are rethrown with
// the frame index prefixed.
PipelineResult RunPipeline(std::span<const FrameBundle> frames,
                           const PipelineConfig& config);
// Generates frames lazily from the script.
PipelineResult RunPipeline(const SceneScript& script, std::uint64_t seed,
                           const PipelineConfig& config);

// Per-class table: iou, extended iou, raw iou, flips and relative STCV.
std::string MetricsCsv(const PipelineReport& report);
// Per-frame STCV for fused and raw predictions.
std::string FramesCsv(const PipelineReport& report);
// Structured-text (JSON) summary.
std::string SummaryText(const PipelineReport& report);

// features.ocg, attributes.ocg, pred_labels.ocg, gt_labels.ocg and
// manifest.json.
void WriteMemoryDump(const std::filesystem::path& dir, const SceneMemory& mem,
                     const PipelineReport& report);

// <dir>/poses.txt plus pred/, gt/, vis/ and dynamic/ holding one NNNNNN.ocg
// per frame: the input layout of the eval command.
void WriteEvalDump(const std::filesystem::path& dir, const PipelineFrames& frames);

struct EvalReport {
  ConsistencyLedger ledger;
  IouReport iou, iou_extended;
  int frames = 0;
};

// Reads an eval dump. Throws InvalidArgumentError (IoError) on a missing
// file, a frame-count mismatch or inconsistent grid dimensions.
EvalReport EvaluateDump(const std::filesystem::path& dir, const ClassSet& classes);

// Per-class CSV and JSON summary for an eval run.
std::string EvalCsv(const EvalReport& report, const ClassSet& classes);
std::string EvalSummaryText(const EvalReport& report);

}  // namespace stocc

#endif  // STOCC_PIPELINE_H_
