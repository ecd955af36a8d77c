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
#ifndef STOCC_MEMORY_H_
#define STOCC_MEMORY_H_

#include <cstdint>
#include <span>
#include <vector>

#include "stocc/geometry.h"

namespace stocc {

// Channel budget of a scene memory. The defaults give 80 + 18 + 1 + 2 = 101
// channels per voxel.
struct MemoryLayout {
  int feature_channels = 80;
  int num_classes = 18;
  int free_class = 17;

  int attribute_channels() const { return num_classes + 3; }
  int total_channels() const { return feature_channels + attribute_channels(); }
  // Offsets inside the attribute plane.
  int activation_offset() const { return 0; }
  int log_variance_offset() const { return num_classes; }
  int flow_offset() const { return num_classes + 1; }

  void Validate() const;
};

// Bitmask of continuous plane groups. Extracted grids concatenate the
// selected groups in the order features, activation, log variance, flow.
struct PlaneSet {
  static constexpr unsigned kFeatures = 1u << 0;
  static constexpr unsigned kActivation = 1u << 1;
  static constexpr unsigned kLogVariance = 1u << 2;
  static constexpr unsigned kFlow = 1u << 3;
  static constexpr unsigned kAttributes = kActivation | kLogVariance | kFlow;
  static constexpr unsigned kAll = kFeatures | kAttributes;

  unsigned bits = 0;

  bool has(unsigned flag) const { return (bits & flag) != 0; }
  int Channels(const MemoryLayout& layout) const;
};

enum class LabelPlane { kPrediction, kGroundTruth, kObserved, kHistoryVisible };

// Scene-centered memory covering a whole driving sequence. Continuous planes
// start at zero, label planes at the free class, masks at zero.
class SceneMemory {
 public:
  // Extent is the axis-aligned box of every frame's grid corners mapped into
  // the scene frame, snapped outward to the lattice of the first frame.
  // Throws InvalidArgumentError on an empty trajectory.
  static SceneMemory Allocate(std::span<const Pose> trajectory,
                              const GridSpec& frame_spec,
                              const MemoryLayout& layout);

  // Scene grid geometry; channels() is layout().total_channels().
  const GridSpec& spec() const { return spec_; }
  const GridSpec& frame_spec() const { return frame_spec_; }
  const MemoryLayout& layout() const { return layout_; }

  VoxelGrid& features() { return features_; }
  const VoxelGrid& features() const { return features_; }
  VoxelGrid& attributes() { return attributes_; }
  const VoxelGrid& attributes() const { return attributes_; }
  LabelGrid& predictions() { return pred_; }
  const LabelGrid& predictions() const { return pred_; }
  LabelGrid& ground_truth() { return gt_; }
  const LabelGrid& ground_truth() const { return gt_; }
  LabelGrid& observed() { return observed_; }
  const LabelGrid& observed() const { return observed_; }
  LabelGrid& history_visible() { return history_visible_; }
  const LabelGrid& history_visible() const { return history_visible_; }

  const LabelGrid& Labels(LabelPlane plane) const;

  std::int64_t StoredCells() const { return spec_.Cells(); }
  // (H_G * W_G * Z_G - H * W * Z) / (H * W * Z).
  double RelativeVolumeChange() const;
  // Bytes held by every plane of the memory.
  std::size_t Bytes() const;
  bool allocated() const { return spec_.Cells() > 0 && !pred_.data().empty(); }

  // Clears features, attributes and the observed mask. Label planes and the
  // visibility history are evaluation state and survive.
  void ResetTemporalState();

 private:
  GridSpec spec_;
  GridSpec frame_spec_;
  MemoryLayout layout_;
  VoxelGrid features_;
  VoxelGrid attributes_;
  LabelGrid pred_;
  LabelGrid gt_;
  LabelGrid observed_;
  LabelGrid history_visible_;
};

// Samples the selected planes at every frame voxel center mapped into the
// scene by `pose` (trilinear, zero outside the memory).
VoxelGrid ExtractRoi(const SceneMemory& mem, const Pose& pose,
                     const GridSpec& frame_spec, PlaneSet planes);

// Nearest-neighbor read of a label plane. Voxels outside the memory read as
// the free class (or 0 for mask planes).
LabelGrid ExtractLabels(const SceneMemory& mem, const Pose& pose,
                        const GridSpec& frame_spec, LabelPlane plane);

// Frame-aligned inputs for a write-back. Null members are skipped.
struct FrameWrite {
  const VoxelGrid* features = nullptr;      // F channels
  const VoxelGrid* log_variance = nullptr;  // 1 channel (delta)
  const VoxelGrid* flow = nullptr;          // 2 channels
  const LabelGrid* predictions = nullptr;
  const LabelGrid* ground_truth = nullptr;
  const LabelGrid* visibility = nullptr;    // OR-ed into history_visible
};

// Reverse-mapped write: every memory voxel of the RoI is taken into the ego
// frame with pose^-1 and, when it lands inside the frame's node hull,
// receives a bilinear sample (continuous planes) or the nearest label from
// its nearest z layer. Updated voxels are marked observed.
void WriteRoi(SceneMemory& mem, const Pose& pose, const FrameWrite& frame);

// c <- softmax(alpha * c_t + (1 - alpha) * c_hist) through the write-back
// path. A never-written c_hist counts as uniform. Throws InvalidArgumentError
// for alpha outside [0, 1] or a channel mismatch.
void DecayUpdateClassActivation(SceneMemory& mem, const Pose& pose,
                                const VoxelGrid& class_activation,
                                double alpha);

void WriteAttributes(SceneMemory& mem, const Pose& pose,
                     const VoxelGrid& log_variance, const VoxelGrid& flow);
void WriteLabels(SceneMemory& mem, const Pose& pose,
                 const LabelGrid& predictions, const LabelGrid& ground_truth);

// Per-voxel arithmetic mean over the channels of a per-class log variance
// grid, giving the 1-channel delta plane.
VoxelGrid MeanLogVariance(const VoxelGrid& log_variance);

// Numerically stable softmax of `logits` into `out`.
void Softmax(std::span<const double> logits, std::span<double> out);

}  // namespace stocc

#endif  // STOCC_MEMORY_H_
