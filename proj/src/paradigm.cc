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
#include "stocc/paradigm.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>

#include "stocc/common.h"
#include "stocc/memory.h"

namespace stocc {
namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double SnapNode(double v) {
  const double r = std::nearbyint(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

}  // namespace

std::string ParadigmName(Paradigm p) {
  switch (p) {
    case Paradigm::kRecurrent:
      return "recurrent";
    case Paradigm::kStacked:
      return "stacked";
    case Paradigm::kUnified:
      return "unified";
  }
  return "unknown";
}

Paradigm ParseParadigm(const std::string& name) {
  if (name == "recurrent") return Paradigm::kRecurrent;
  if (name == "stacked") return Paradigm::kStacked;
  if (name == "unified") return Paradigm::kUnified;
  throw InvalidArgumentError("unknown paradigm '" + name +
                             "' (expected recurrent|stacked|unified)");
}

AlignedGrid AlignGrid(const VoxelGrid& grid, const Pose& from, const Pose& to) {
  const GridSpec& spec = grid.spec();
  // Points of the `to` frame expressed in the `from` frame.
  const Pose to_in_from = RelativeTransform(to, from);
  AlignedGrid out{VoxelGrid(spec),
                  std::vector<std::uint8_t>(static_cast<std::size_t>(spec.Cells()), 0)};
  const int rows_per_layer = spec.dims.h;
  ParallelFor(0, static_cast<std::int64_t>(spec.dims.z) * rows_per_layer,
              [&](std::int64_t row) {
    const int z = static_cast<int>(row / rows_per_layer);
    const int y = static_cast<int>(row % rows_per_layer);
    for (int x = 0; x < spec.dims.w; ++x) {
      Vec3 c = WorldToGrid(spec, to_in_from.Apply(spec.VoxelCenter(x, y, z)));
      c = Vec3(SnapNode(c.x()), SnapNode(c.y()), SnapNode(c.z()));
      const std::int64_t cell = spec.CellIndex(x, y, z);
      if (c.x() < 0 || c.y() < 0 || c.z() < 0 || c.x() > spec.dims.w - 1 ||
          c.y() > spec.dims.h - 1 || c.z() > spec.dims.z - 1) {
        continue;
      }
      SampleTrilinear(grid, c, out.values.At(cell));
      out.valid[static_cast<std::size_t>(cell)] = 1;
    }
  });
  return out;
}

VoxelGrid AverageFuse(const VoxelGrid& current,
                      std::span<const AlignedGrid> history) {
  VoxelGrid out(current.spec());
  const int channels = current.channels();
  for (std::int64_t cell = 0; cell < current.spec().Cells(); ++cell) {
    auto dst = out.At(cell);
    int count = 1;
    for (const AlignedGrid& h : history) {
      if (!h.valid[static_cast<std::size_t>(cell)]) continue;
      const auto src = h.values.At(cell);
      for (int c = 0; c < channels; ++c) dst[c] += src[c];
      ++count;
    }
    const auto cur = current.At(cell);
    for (int c = 0; c < channels; ++c) {
      dst[c] = (dst[c] + cur[c]) / count;
    }
  }
  return out;
}

VoxelGrid FuseWindow(Paradigm paradigm,
                     std::span<const ParadigmFrame* const> window,
                     const FuseOp& fuse) {
  if (window.empty()) throw InvalidArgumentError("empty fusion window");
  const ParadigmFrame& f = *window.back();
  if (paradigm == Paradigm::kUnified) {
    throw InvalidArgumentError("the unified paradigm fuses against a scene memory");
  }
  if (paradigm == Paradigm::kStacked) {
    std::vector<AlignedGrid> history;
    history.reserve(window.size());
    for (std::size_t i = 0; i + 1 < window.size(); ++i) {
      history.push_back(AlignGrid(window[i]->features, window[i]->pose, f.pose));
    }
    return fuse(f.features, history);
  }
  // Replay the recurrence from the oldest frame in the window.
  VoxelGrid state = fuse(window.front()->features, {});
  for (std::size_t i = 1; i < window.size(); ++i) {
    const AlignedGrid aligned =
        AlignGrid(state, window[i - 1]->pose, window[i]->pose);
    state = fuse(window[i]->features, std::span<const AlignedGrid>(&aligned, 1));
  }
  return state;
}

ParadigmRun RunParadigm(Paradigm paradigm, std::span<const ParadigmFrame> frames,
                        const FuseOp& fuse, const ParadigmOptions& options) {
  if (options.k < 1) throw InvalidArgumentError("k must be >= 1");
  ParadigmRun run;
  if (frames.empty()) return run;
  const int k = options.k;
  if (static_cast<std::size_t>(k) > frames.size()) {
    run.truncated = true;
    std::cerr << "warning: k=" << k << " exceeds the " << frames.size()
              << " available frames; history truncated\n";
  }
  auto record = [&](VoxelGrid&& out, std::size_t bytes, double seconds) {
    run.trace.history_bytes.push_back(bytes);
    run.trace.fuse_seconds.push_back(seconds);
    run.trace.peak_history_bytes = std::max(run.trace.peak_history_bytes, bytes);
    if (options.keep_outputs) run.outputs.push_back(std::move(out));
  };

  if (paradigm == Paradigm::kUnified) {
    std::vector<Pose> trajectory;
    for (const ParadigmFrame& f : frames) trajectory.push_back(f.pose);
    GridSpec frame_spec = frames.front().features.spec();
    MemoryLayout layout;
    layout.feature_channels = frame_spec.channels;
    layout.num_classes = 1;
    layout.free_class = 0;
    SceneMemory mem = SceneMemory::Allocate(trajectory, frame_spec, layout);
    const std::size_t bytes = mem.features().Bytes();
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const ParadigmFrame& f = frames[t];
      const auto start = Clock::now();
      if (k == 1) {
        VoxelGrid out = fuse(f.features, {});
        record(std::move(out), bytes, Seconds(start));
        continue;
      }
      if (t % static_cast<std::size_t>(k) == 0) mem.ResetTemporalState();
      AlignedGrid history{
          ExtractRoi(mem, f.pose, frame_spec, PlaneSet{PlaneSet::kFeatures}), {}};
      const LabelGrid observed =
          ExtractLabels(mem, f.pose, frame_spec, LabelPlane::kObserved);
      history.valid.assign(observed.data().begin(), observed.data().end());
      VoxelGrid out = fuse(f.features, std::span<const AlignedGrid>(&history, 1));
      FrameWrite write;
      write.features = &out;
      WriteRoi(mem, f.pose, write);
      record(std::move(out), bytes, Seconds(start));
    }
    return run;
  }

  std::vector<const ParadigmFrame*> window;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    window.push_back(&frames[t]);
    if (window.size() > static_cast<std::size_t>(k)) window.erase(window.begin());
    std::size_t bytes = 0;
    for (const ParadigmFrame* w : window) bytes += w->features.Bytes();

    const auto start = Clock::now();
    VoxelGrid out = FuseWindow(paradigm, window, fuse);
    record(std::move(out), bytes, Seconds(start));
  }
  return run;
}

}  // namespace stocc
