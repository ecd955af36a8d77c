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
#ifndef STOCC_SIMULATOR_H_
#define STOCC_SIMULATOR_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stocc/geometry.h"

namespace stocc {

struct BoxPrimitive {
  Vec3 min = Vec3::Zero();  // world meters, at t = 0
  Vec3 max = Vec3::Zero();
  int label = 0;
  Vec3 velocity = Vec3::Zero();  // m/s, dynamic instances only

  bool Contains(const Vec3& p, double time) const;
};

struct GroundSlab {
  double z_top = -0.8;  // everything at or below is ground
  int label = 10;
};

enum class TrajectoryKind { kStraight, kArc };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kStraight;
  Vec3 start = Vec3::Zero();
  double speed = 0.8;  // m/s
  double heading_deg = 0.0;
  double yaw_rate_deg = 0.0;  // deg/s, arc only
};

// Everything needed to regenerate a synthetic scene bit-for-bit.
struct SceneScript {
  // Ego-frame grid; its channels field is ignored.
  GridSpec grid = DefaultGrid(50, 50, 4, 0.4);
  int num_classes = 18;
  int free_class = 17;
  int feature_channels = 16;

  std::optional<GroundSlab> ground = GroundSlab{};
  std::vector<BoxPrimitive> statics;
  std::vector<BoxPrimitive> dynamics;
  TrajectorySpec trajectory;
  int frame_count = 40;
  double frame_dt = 0.5;  // seconds

  double label_flip_p = 0.0;
  double feature_sigma = 0.0;
  double visibility_range = 1e9;  // meters
  double fov_deg = 360.0;

  Vec3 world_min = Vec3::Constant(-1000.0);
  Vec3 world_max = Vec3::Constant(1000.0);
  std::uint64_t seed = 0;

  // Grid centered on the ego in x/y, lowest layer center at z = -1.0.
  static GridSpec DefaultGrid(int h, int w, int z, double voxel_size);

  // Throws InvalidArgumentError for invalid settings or primitives outside
  // [world_min, world_max].
  void Validate() const;

  std::vector<Pose> Trajectory() const;
  std::vector<int> DynamicClasses() const;
};

// Parses the structured-text (JSON) scene format. Unknown keys are errors.
SceneScript ParseSceneScript(const std::string& text);
SceneScript LoadSceneScript(const std::filesystem::path& path);
std::string SceneScriptToText(const SceneScript& script);

// Static street scene: ground, buildings on both sides, parked vehicles and
// poles, straight ego motion at one voxel per frame.
SceneScript DefaultStaticScene(double label_flip_p, std::uint64_t seed);
// The static scene plus two moving vehicles.
SceneScript DefaultDynamicScene(double label_flip_p, std::uint64_t seed);

struct FrameBundle {
  int t = 0;
  Pose pose;
  VoxelGrid features;       // F
  VoxelGrid activation;     // N, rows on the simplex
  VoxelGrid log_variance;   // N
  VoxelGrid flow;           // 2, grid units per frame (predicted)
  VoxelGrid gt_flow;        // 2
  LabelGrid prediction;     // noisy per-frame prediction
  LabelGrid ground_truth;
  LabelGrid visibility;
  LabelGrid dynamic_mask;   // voxels covered by a dynamic instance
};

// Rasterizes frame t. Each frame draws from its own stream derived from
// (seed, t), so frames can be produced lazily and in any order.
FrameBundle GenerateFrame(const SceneScript& script, std::uint64_t seed, int t);

// Every frame of the script. Deterministic in (script, seed).
std::vector<FrameBundle> GenerateScene(const SceneScript& script,
                                       std::uint64_t seed);

}  // namespace stocc

#endif  // STOCC_SIMULATOR_H_
