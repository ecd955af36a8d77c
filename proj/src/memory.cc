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
#include "stocc/memory.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stocc/common.h"

namespace stocc {
namespace {

// Fractional coordinates this close to a node are treated as the node, so
// lattice-aligned poses read and write bit-exactly despite rounding in the
// metric transform.
constexpr double kSnapTolerance = 1e-9;

double Snap(double v) {
  const double r = std::nearbyint(v);
  return std::abs(v - r) < kSnapTolerance ? r : v;
}

Vec3 SnapCoord(const Vec3& v) { return Vec3(Snap(v.x()), Snap(v.y()), Snap(v.z())); }

// Frame voxel -> scene fractional coordinate.
Vec3 FrameToScene(const SceneMemory& mem, const Pose& pose,
                  const GridSpec& frame_spec, int x, int y, int z) {
  return SnapCoord(
      WorldToGrid(mem.spec(), pose.Apply(frame_spec.VoxelCenter(x, y, z))));
}

void CheckFrameGrid(const GridSpec& frame_spec, const GridSpec& expected,
                    int channels, const char* what) {
  if (frame_spec.dims != expected.dims) {
    throw InvalidArgumentError(std::string(what) +
                               ": frame dims do not match the memory frame "
                               "spec");
  }
  if (channels >= 0 && frame_spec.channels != channels) {
    throw InvalidArgumentError(std::string(what) + ": expected " +
                               std::to_string(channels) + " channels, got " +
                               std::to_string(frame_spec.channels));
  }
}

void CheckAllocated(const SceneMemory& mem) {
  if (!mem.allocated()) throw InvalidArgumentError("memory is not allocated");
}

struct RoiVoxel {
  std::int64_t mem_cell;
  Vec2 ego_xy;          // fractional, inside the frame node hull
  int z_layer;          // nearest ego z layer
  std::int64_t nn_cell;  // nearest ego voxel
};

// Visits every memory voxel of the write RoI whose center maps inside the
// frame's node hull. Rows are distributed over threads; fn only touches the
// memory voxel it is given.
template <typename Fn>
void ForEachRoiVoxel(const SceneMemory& mem, const Pose& pose, Fn&& fn) {
  const GridSpec& scene = mem.spec();
  const GridSpec& frame = mem.frame_spec();
  const Pose inv = pose.Inverse();

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (int i = 0; i < 8; ++i) {
    const int x = (i & 1) ? frame.dims.w - 1 : 0;
    const int y = (i & 2) ? frame.dims.h - 1 : 0;
    const int z = (i & 4) ? frame.dims.z - 1 : 0;
    const Vec3 s = FrameToScene(mem, pose, frame, x, y, z);
    lo = lo.cwiseMin(s);
    hi = hi.cwiseMax(s);
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(lo.x())) - 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(lo.y())) - 1);
  const int z0 = std::max(0, static_cast<int>(std::floor(lo.z())) - 1);
  const int x1 = std::min(scene.dims.w - 1, static_cast<int>(std::ceil(hi.x())) + 1);
  const int y1 = std::min(scene.dims.h - 1, static_cast<int>(std::ceil(hi.y())) + 1);
  const int z1 = std::min(scene.dims.z - 1, static_cast<int>(std::ceil(hi.z())) + 1);
  if (x0 > x1 || y0 > y1 || z0 > z1) return;

  const int rows_per_layer = y1 - y0 + 1;
  const std::int64_t rows =
      static_cast<std::int64_t>(z1 - z0 + 1) * rows_per_layer;
  const double max_x = frame.dims.w - 1;
  const double max_y = frame.dims.h - 1;
  ParallelFor(0, rows, [&](std::int64_t row) {
    const int z = z0 + static_cast<int>(row / rows_per_layer);
    const int y = y0 + static_cast<int>(row % rows_per_layer);
    for (int x = x0; x <= x1; ++x) {
      const Vec3 ego =
          SnapCoord(WorldToGrid(frame, inv.Apply(scene.VoxelCenter(x, y, z))));
      if (!(ego.x() >= 0.0 && ego.x() <= max_x && ego.y() >= 0.0 &&
            ego.y() <= max_y)) {
        continue;
      }
      const double layer = std::floor(ego.z() + 0.5);
      if (!(layer >= 0.0 && layer < frame.dims.z)) continue;
      RoiVoxel v;
      v.mem_cell = scene.CellIndex(x, y, z);
      v.ego_xy = Vec2(ego.x(), ego.y());
      v.z_layer = static_cast<int>(layer);
      v.nn_cell = frame.CellIndex(static_cast<int>(std::floor(ego.x() + 0.5)),
                                  static_cast<int>(std::floor(ego.y() + 0.5)),
                                  v.z_layer);
      fn(v);
    }
  });
}

}  // namespace

void MemoryLayout::Validate() const {
  if (feature_channels < 0) {
    throw InvalidArgumentError("feature_channels must be >= 0");
  }
  if (num_classes < 1 || num_classes > 255) {
    throw InvalidArgumentError("num_classes must be in [1, 255]");
  }
  if (free_class < 0 || free_class >= num_classes) {
    throw InvalidArgumentError("free_class must be a valid class index");
  }
}

int PlaneSet::Channels(const MemoryLayout& layout) const {
  int c = 0;
  if (has(kFeatures)) c += layout.feature_channels;
  if (has(kActivation)) c += layout.num_classes;
  if (has(kLogVariance)) c += 1;
  if (has(kFlow)) c += 2;
  return c;
}

SceneMemory SceneMemory::Allocate(std::span<const Pose> trajectory,
                                  const GridSpec& frame_spec,
                                  const MemoryLayout& layout) {
  if (trajectory.empty()) {
    throw InvalidArgumentError("cannot allocate memory for an empty trajectory");
  }
  frame_spec.Validate();
  layout.Validate();

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Pose& pose : trajectory) {
    for (const Vec3& corner : frame_spec.ExtentCorners()) {
      const Vec3 p = pose.Apply(corner);
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  const double s = frame_spec.voxel_size;
  const Vec3 anchor = trajectory.front().Apply(frame_spec.origin);

  SceneMemory mem;
  mem.layout_ = layout;
  mem.frame_spec_ = frame_spec;
  mem.spec_.voxel_size = s;
  mem.spec_.channels = layout.total_channels();
  int dims[3];
  // Memory cells must cover [lo, hi]; cell i spans origin + (i -+ 1/2) * s.
  for (int a = 0; a < 3; ++a) {
    const double steps = std::floor((lo[a] + 0.5 * s - anchor[a]) / s + 1e-9);
    mem.spec_.origin[a] = anchor[a] + steps * s;
    dims[a] = static_cast<int>(
        std::ceil((hi[a] + 0.5 * s - mem.spec_.origin[a]) / s - 1e-9));
    dims[a] = std::max(dims[a], 1);
  }
  mem.spec_.dims = {dims[1], dims[0], dims[2]};
  mem.spec_.Validate();

  GridSpec plane = mem.spec_;
  plane.channels = layout.feature_channels;
  mem.features_ = VoxelGrid(plane);
  plane.channels = layout.attribute_channels();
  mem.attributes_ = VoxelGrid(plane);
  plane.channels = 1;
  mem.pred_ = LabelGrid(plane, static_cast<std::uint8_t>(layout.free_class));
  mem.gt_ = LabelGrid(plane, static_cast<std::uint8_t>(layout.free_class));
  mem.observed_ = LabelGrid(plane, 0);
  mem.history_visible_ = LabelGrid(plane, 0);
  return mem;
}

const LabelGrid& SceneMemory::Labels(LabelPlane plane) const {
  switch (plane) {
    case LabelPlane::kPrediction:
      return pred_;
    case LabelPlane::kGroundTruth:
      return gt_;
    case LabelPlane::kObserved:
      return observed_;
    case LabelPlane::kHistoryVisible:
      return history_visible_;
  }
  throw InvariantError("unknown label plane");
}

double SceneMemory::RelativeVolumeChange() const {
  const double frame_cells = static_cast<double>(frame_spec_.Cells());
  return (static_cast<double>(spec_.Cells()) - frame_cells) / frame_cells;
}

std::size_t SceneMemory::Bytes() const {
  return features_.Bytes() + attributes_.Bytes() + pred_.data().size() +
         gt_.data().size() + observed_.data().size() +
         history_visible_.data().size();
}

void SceneMemory::ResetTemporalState() {
  std::fill(features_.data().begin(), features_.data().end(), 0.0);
  std::fill(attributes_.data().begin(), attributes_.data().end(), 0.0);
  std::fill(observed_.data().begin(), observed_.data().end(), 0);
}

VoxelGrid ExtractRoi(const SceneMemory& mem, const Pose& pose,
                     const GridSpec& frame_spec, PlaneSet planes) {
  CheckAllocated(mem);
  if (planes.bits == 0) {
    throw InvalidArgumentError("extract_roi: empty plane selector");
  }
  const MemoryLayout& layout = mem.layout();
  GridSpec out_spec = frame_spec;
  out_spec.channels = planes.Channels(layout);
  VoxelGrid out(out_spec);

  const int f = layout.feature_channels;
  const int a = layout.attribute_channels();
  const bool want_features = planes.has(PlaneSet::kFeatures) && f > 0;
  const bool want_attrs = (planes.bits & PlaneSet::kAttributes) != 0;
  const int rows_per_layer = frame_spec.dims.h;
  ParallelFor(0, static_cast<std::int64_t>(frame_spec.dims.z) * rows_per_layer,
              [&](std::int64_t row) {
    const int z = static_cast<int>(row / rows_per_layer);
    const int y = static_cast<int>(row % rows_per_layer);
    std::vector<double> feat(f);
    std::vector<double> attr(a);
    for (int x = 0; x < frame_spec.dims.w; ++x) {
      const Vec3 coord = FrameToScene(mem, pose, frame_spec, x, y, z);
      auto dst = out.At(x, y, z);
      std::size_t k = 0;
      if (want_features) {
        SampleTrilinear(mem.features(), coord, feat);
        for (double v : feat) dst[k++] = v;
      }
      if (want_attrs) {
        SampleTrilinear(mem.attributes(), coord, attr);
        if (planes.has(PlaneSet::kActivation)) {
          for (int c = 0; c < layout.num_classes; ++c) {
            dst[k++] = attr[layout.activation_offset() + c];
          }
        }
        if (planes.has(PlaneSet::kLogVariance)) {
          dst[k++] = attr[layout.log_variance_offset()];
        }
        if (planes.has(PlaneSet::kFlow)) {
          dst[k++] = attr[layout.flow_offset()];
          dst[k++] = attr[layout.flow_offset() + 1];
        }
      }
    }
  });
  return out;
}

LabelGrid ExtractLabels(const SceneMemory& mem, const Pose& pose,
                        const GridSpec& frame_spec, LabelPlane plane) {
  CheckAllocated(mem);
  const bool is_mask =
      plane == LabelPlane::kObserved || plane == LabelPlane::kHistoryVisible;
  const std::uint8_t fill =
      is_mask ? 0 : static_cast<std::uint8_t>(mem.layout().free_class);
  GridSpec out_spec = frame_spec;
  out_spec.channels = 1;
  LabelGrid out(out_spec, fill);
  const LabelGrid& src = mem.Labels(plane);
  for (int z = 0; z < frame_spec.dims.z; ++z) {
    for (int y = 0; y < frame_spec.dims.h; ++y) {
      for (int x = 0; x < frame_spec.dims.w; ++x) {
        const std::int64_t cell = NearestCell(
            mem.spec(), FrameToScene(mem, pose, frame_spec, x, y, z));
        if (cell >= 0) out(x, y, z) = src[cell];
      }
    }
  }
  return out;
}

void WriteRoi(SceneMemory& mem, const Pose& pose, const FrameWrite& frame) {
  CheckAllocated(mem);
  const MemoryLayout& layout = mem.layout();
  const GridSpec& fs = mem.frame_spec();
  if (frame.features) {
    CheckFrameGrid(frame.features->spec(), fs, layout.feature_channels,
                   "write features");
  }
  if (frame.log_variance) {
    CheckFrameGrid(frame.log_variance->spec(), fs, 1, "write log variance");
  }
  if (frame.flow) CheckFrameGrid(frame.flow->spec(), fs, 2, "write flow");
  if (frame.predictions) {
    CheckFrameGrid(frame.predictions->spec(), fs, -1, "write predictions");
  }
  if (frame.ground_truth) {
    CheckFrameGrid(frame.ground_truth->spec(), fs, -1, "write ground truth");
  }
  if (frame.visibility) {
    CheckFrameGrid(frame.visibility->spec(), fs, -1, "write visibility");
  }

  ForEachRoiVoxel(mem, pose, [&](const RoiVoxel& v) {
    if (frame.features && layout.feature_channels > 0) {
      SampleBilinearXY(*frame.features, v.ego_xy, v.z_layer,
                       mem.features().At(v.mem_cell));
    }
    auto attr = mem.attributes().At(v.mem_cell);
    if (frame.log_variance) {
      SampleBilinearXY(*frame.log_variance, v.ego_xy, v.z_layer,
                       attr.subspan(layout.log_variance_offset(), 1));
    }
    if (frame.flow) {
      SampleBilinearXY(*frame.flow, v.ego_xy, v.z_layer,
                       attr.subspan(layout.flow_offset(), 2));
    }
    if (frame.predictions) mem.predictions()[v.mem_cell] = (*frame.predictions)[v.nn_cell];
    if (frame.ground_truth) mem.ground_truth()[v.mem_cell] = (*frame.ground_truth)[v.nn_cell];
    if (frame.visibility && (*frame.visibility)[v.nn_cell] != 0) {
      mem.history_visible()[v.mem_cell] = 1;
    }
    mem.observed()[v.mem_cell] = 1;
  });
}

void DecayUpdateClassActivation(SceneMemory& mem, const Pose& pose,
                                const VoxelGrid& class_activation,
                                double alpha) {
  CheckAllocated(mem);
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidArgumentError("decay alpha must be in [0, 1]");
  }
  const MemoryLayout& layout = mem.layout();
  const int n = layout.num_classes;
  CheckFrameGrid(class_activation.spec(), mem.frame_spec(), n,
                 "decay update");
  const double uniform = 1.0 / n;
  ForEachRoiVoxel(mem, pose, [&](const RoiVoxel& v) {
    std::vector<double> current(n);
    std::vector<double> mixed(n);
    SampleBilinearXY(class_activation, v.ego_xy, v.z_layer, current);
    auto stored = mem.attributes().At(v.mem_cell).subspan(
        layout.activation_offset(), n);
    double hist_sum = 0.0;
    for (double c : stored) hist_sum += c;
    const bool cold = hist_sum < 0.5;
    for (int i = 0; i < n; ++i) {
      const double hist = cold ? uniform : stored[i];
      mixed[i] = alpha * current[i] + (1.0 - alpha) * hist;
    }
    Softmax(mixed, stored);
    mem.observed()[v.mem_cell] = 1;
  });
}

void WriteAttributes(SceneMemory& mem, const Pose& pose,
                     const VoxelGrid& log_variance, const VoxelGrid& flow) {
  FrameWrite w;
  w.log_variance = &log_variance;
  w.flow = &flow;
  WriteRoi(mem, pose, w);
}

void WriteLabels(SceneMemory& mem, const Pose& pose,
                 const LabelGrid& predictions, const LabelGrid& ground_truth) {
  FrameWrite w;
  w.predictions = &predictions;
  w.ground_truth = &ground_truth;
  WriteRoi(mem, pose, w);
}

VoxelGrid MeanLogVariance(const VoxelGrid& log_variance) {
  const int n = log_variance.channels();
  if (n < 1) throw InvalidArgumentError("log variance grid has no channels");
  GridSpec spec = log_variance.spec();
  spec.channels = 1;
  VoxelGrid out(spec);
  for (std::int64_t cell = 0; cell < spec.Cells(); ++cell) {
    double sum = 0.0;
    for (double s : log_variance.At(cell)) sum += s;
    out.At(cell)[0] = sum / n;
  }
  return out;
}

void Softmax(std::span<const double> logits, std::span<double> out) {
  if (logits.empty()) return;
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= total;
}

}  // namespace stocc
