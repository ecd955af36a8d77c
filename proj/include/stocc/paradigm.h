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
#ifndef STOCC_PARADIGM_H_
#define STOCC_PARADIGM_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stocc/geometry.h"

namespace stocc {

enum class Paradigm { kRecurrent, kStacked, kUnified };

std::string ParadigmName(Paradigm p);
// Throws InvalidArgumentError for anything but recurrent|stacked|unified.
Paradigm ParseParadigm(const std::string& name);

// A historical grid resampled into the current frame, with a per-voxel flag
// telling whether the sample came from inside the source grid.
struct AlignedGrid {
  VoxelGrid values;
  std::vector<std::uint8_t> valid;
};

// Resamples `grid` (expressed in the frame of `from`) onto the lattice of the
// frame at `to`, trilinearly.
AlignedGrid AlignGrid(const VoxelGrid& grid, const Pose& from, const Pose& to);

// psi(current, history...). History entries are ordered oldest first.
using FuseOp = std::function<VoxelGrid(const VoxelGrid& current,
                                       std::span<const AlignedGrid> history)>;

// Equal-weight mean of the current value and every valid history value, summed
// oldest first with the current value last.
VoxelGrid AverageFuse(const VoxelGrid& current,
                      std::span<const AlignedGrid> history);

struct ParadigmFrame {
  Pose pose;
  VoxelGrid features;
};

struct ResourceTrace {
  std::vector<std::size_t> history_bytes;  // resident after each frame
  std::vector<double> fuse_seconds;        // temporal work per frame
  std::size_t peak_history_bytes = 0;
};

struct ParadigmRun {
  std::vector<VoxelGrid> outputs;  // empty unless keep_outputs
  ResourceTrace trace;
  bool truncated = false;  // k exceeded the frame count
};

struct ParadigmOptions {
  int k = 1;
  bool keep_outputs = true;
};

// Output for the last frame of `window` (oldest first) under a queue
// paradigm. Throws InvalidArgumentError for kUnified or an empty window.
VoxelGrid FuseWindow(Paradigm paradigm,
                     std::span<const ParadigmFrame* const> window,
                     const FuseOp& fuse);

// Recurrent: keeps the last k raw frames and replays k - 1 align+fuse calls
// per frame. Stacked: keeps the last k frames, aligns each to the current
// frame and fuses once. Unified: one scene memory sized from all poses, one
// fuse against the extracted RoI, then write-back; the memory restarts every
// k frames and k = 1 disables fusion.
ParadigmRun RunParadigm(Paradigm paradigm, std::span<const ParadigmFrame> frames,
                        const FuseOp& fuse, const ParadigmOptions& options);

}  // namespace stocc

#endif  // STOCC_PARADIGM_H_
