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
#include "stocc/simulator.h"

#include <algorithm>
#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "stocc/common.h"
#include "stocc/memory.h"
#include "stocc/pipeline.h"

namespace stocc {
namespace {

// Stationary ego in an empty world with one moving box.
SceneScript MovingBoxScene(const Vec3& velocity, int frames) {
  SceneScript s;
  s.ground.reset();
  s.trajectory.speed = 0.0;
  s.frame_count = frames;
  s.dynamics = {{Vec3(-6.0, -1.2, -1.2), Vec3(-4.0, 0.4, 0.0), 4, velocity}};
  s.seed = 3;
  return s;
}

int Count(const LabelGrid& g) {
  return static_cast<int>(std::count_if(g.data().begin(), g.data().end(),
                                        [](std::uint8_t v) { return v != 0; }));
}

TEST(SimulatorTest, DefaultGridLayout) {
  const GridSpec g = SceneScript::DefaultGrid(50, 50, 4, 0.4);
  EXPECT_EQ(g.dims, (GridDims{50, 50, 4}));
  EXPECT_DOUBLE_EQ(g.origin.x(), -9.8);
  EXPECT_DOUBLE_EQ(g.origin.y(), -9.8);
  EXPECT_DOUBLE_EQ(g.origin.z(), -1.0);
}

TEST(SimulatorTest, StraightTrajectoryAdvancesOneVoxelPerFrame) {
  const SceneScript s = DefaultStaticScene(0.0, 0);
  const auto poses = s.Trajectory();
  ASSERT_EQ(poses.size(), 40u);
  for (int t = 1; t < 40; ++t) {
    const Vec3 step = poses[t].translation() - poses[t - 1].translation();
    EXPECT_NEAR(step.x(), 0.4, 1e-12);
    EXPECT_NEAR(step.y(), 0.0, 1e-12);
    EXPECT_EQ(poses[t].frame_id(), t);
  }
}

TEST(SimulatorTest, ArcTrajectoryTurnsAtYawRate) {
  SceneScript s;
  s.trajectory.kind = TrajectoryKind::kArc;
  s.trajectory.yaw_rate_deg = 10.0;
  s.frame_count = 5;
  const auto poses = s.Trajectory();
  const Mat4& m = poses[4].matrix();
  EXPECT_NEAR(std::atan2(m(1, 0), m(0, 0)), 20.0 * M_PI / 180.0, 1e-12);
  // Constant speed along the arc: chord length between frames is fixed.
  const double chord = (poses[1].translation() - poses[0].translation()).norm();
  EXPECT_NEAR((poses[4].translation() - poses[3].translation()).norm(), chord, 1e-12);
}

TEST(SimulatorTest, GroundTruthFlowInGridUnits) {
  const FrameBundle f = GenerateFrame(MovingBoxScene(Vec3(2.0, 0.0, 0.0), 4), 0, 1);
  int dynamic = 0;
  for (std::int64_t i = 0; i < f.dynamic_mask.Cells(); ++i) {
    if (f.dynamic_mask[i] == 0) {
      EXPECT_EQ(f.gt_flow.At(i)[0], 0.0);
      continue;
    }
    ++dynamic;
    EXPECT_NEAR(f.gt_flow.At(i)[0], 2.5, 1e-12);
    EXPECT_NEAR(f.gt_flow.At(i)[1], 0.0, 1e-12);
  }
  EXPECT_GT(dynamic, 0);
  EXPECT_EQ(f.flow.data()[0], f.gt_flow.data()[0]);
}

TEST(SimulatorTest, FlowWarpOverlapsNextFrame) {
  // 12 x 12 x 3 voxel instance, up to 2 voxels per frame. Rounding the flow
  // can miss the raster by one layer per axis; at this footprint that still
  // keeps IoU above 0.7.
  for (const Vec3& v : {Vec3(1.6, 0.0, 0.0), Vec3(0.9, 0.7, 0.0), Vec3(-0.5, 1.1, 0.0),
                        Vec3(1.1, -1.1, 0.0), Vec3(0.3, 0.2, 0.0)}) {
    SceneScript s = MovingBoxScene(v, 12);
    s.dynamics[0].min = Vec3(-8.0, -2.4, -1.2);
    s.dynamics[0].max = Vec3(-3.2, 2.4, 0.0);
    for (int t = 0; t + 1 < s.frame_count; ++t) {
      const FrameBundle a = GenerateFrame(s, 0, t);
      const FrameBundle b = GenerateFrame(s, 0, t + 1);
      const GridSpec& spec = a.dynamic_mask.spec();
      LabelGrid warped(spec, 0);
      for (int z = 0; z < spec.dims.z; ++z) {
        for (int y = 0; y < spec.dims.h; ++y) {
          for (int x = 0; x < spec.dims.w; ++x) {
            const std::int64_t i = spec.CellIndex(x, y, z);
            if (!a.dynamic_mask[i]) continue;
            const int wx = x + static_cast<int>(std::lround(a.gt_flow.At(i)[0]));
            const int wy = y + static_cast<int>(std::lround(a.gt_flow.At(i)[1]));
            if (wx < 0 || wy < 0 || wx >= spec.dims.w || wy >= spec.dims.h) continue;
            warped(wx, wy, z) = 1;
          }
        }
      }
      int inter = 0;
      int uni = 0;
      for (std::int64_t i = 0; i < warped.Cells(); ++i) {
        inter += warped[i] && b.dynamic_mask[i];
        uni += warped[i] || b.dynamic_mask[i];
      }
      ASSERT_GT(uni, 0);
      EXPECT_GE(static_cast<double>(inter) / uni, 0.7) << "t " << t << " v " << v.transpose();
    }
  }
}

TEST(SimulatorTest, RigidInstanceVoxelCountIsConserved) {
  const SceneScript s = MovingBoxScene(Vec3(0.9, 0.5, 0.0), 10);
  // 2.0 x 1.6 x 1.2 m at 0.4 m: 5 x 4 x 3 voxels, one layer of slack per face.
  for (int t = 0; t < s.frame_count; ++t) {
    const int n = Count(GenerateFrame(s, 0, t).dynamic_mask);
    EXPECT_GE(n, 4 * 3 * 2) << t;
    EXPECT_LE(n, 6 * 5 * 4) << t;
  }
}

TEST(SimulatorTest, StaticGroundTruthAgreesThroughMemory) {
  const SceneScript s = DefaultStaticScene(0.2, 1);
  MemoryLayout layout;
  layout.feature_channels = 0;
  const auto poses = s.Trajectory();
  const FrameBundle first = GenerateFrame(s, 1, 0);
  SceneMemory mem = SceneMemory::Allocate(poses, first.ground_truth.spec(), layout);
  for (int t = 0; t < s.frame_count; t += 3) {
    const FrameBundle f = GenerateFrame(s, 1, t);
    const LabelGrid gt = ExtractLabels(mem, f.pose, f.ground_truth.spec(),
                                       LabelPlane::kGroundTruth);
    const LabelGrid seen =
        ExtractLabels(mem, f.pose, f.ground_truth.spec(), LabelPlane::kObserved);
    int compared = 0;
    for (std::int64_t i = 0; i < gt.Cells(); ++i) {
      if (!seen[i]) continue;
      ++compared;
      ASSERT_EQ(gt[i], f.ground_truth[i]) << "frame " << t << " cell " << i;
    }
    if (t > 0) EXPECT_GT(compared, 0);
    FrameWrite w;
    w.ground_truth = &f.ground_truth;
    WriteRoi(mem, f.pose, w);
  }
}

TEST(SimulatorTest, ActivationRowsOnSimplex) {
  const FrameBundle f = GenerateFrame(DefaultStaticScene(0.2, 0), 0, 5);
  for (std::int64_t i = 0; i < f.activation.spec().Cells(); ++i) {
    double sum = 0.0;
    for (double v : f.activation.At(i)) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    ASSERT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(SimulatorTest, NoiselessPredictionsEqualGroundTruth) {
  const FrameBundle f = GenerateFrame(DefaultStaticScene(0.0, 0), 0, 7);
  EXPECT_EQ(f.prediction, f.ground_truth);
  const FrameBundle noisy = GenerateFrame(DefaultStaticScene(0.3, 0), 0, 7);
  EXPECT_FALSE(noisy.prediction == noisy.ground_truth);
  // Flips only touch visible voxels.
  for (std::int64_t i = 0; i < noisy.prediction.Cells(); ++i) {
    if (!noisy.visibility[i]) ASSERT_EQ(noisy.prediction[i], noisy.ground_truth[i]);
  }
}

TEST(SimulatorTest, VisibilityRespectsRange) {
  SceneScript s = DefaultStaticScene(0.0, 0);
  s.visibility_range = 4.0;
  const FrameBundle f = GenerateFrame(s, 0, 0);
  const GridSpec& spec = f.visibility.spec();
  int visible = 0;
  for (int z = 0; z < spec.dims.z; ++z) {
    for (int y = 0; y < spec.dims.h; ++y) {
      for (int x = 0; x < spec.dims.w; ++x) {
        if (!f.visibility(x, y, z)) continue;
        ++visible;
        const Vec3 c = spec.VoxelCenter(x, y, z);
        EXPECT_LE(std::hypot(c.x(), c.y()), 4.0 + 1e-9);
      }
    }
  }
  EXPECT_GT(visible, 0);
}

TEST(SimulatorTest, FramesAreDeterministicAndLazy) {
  const SceneScript s = DefaultDynamicScene(0.2, 4);
  const auto all = GenerateScene(s, 4);
  ASSERT_EQ(all.size(), 40u);
  const FrameBundle f = GenerateFrame(s, 4, 17);
  EXPECT_EQ(f.prediction, all[17].prediction);
  EXPECT_EQ(f.ground_truth, all[17].ground_truth);
  EXPECT_TRUE(std::equal(f.features.data().begin(), f.features.data().end(),
                         all[17].features.data().begin()));
  const FrameBundle other = GenerateFrame(s, 5, 17);
  EXPECT_FALSE(other.prediction == f.prediction);
  EXPECT_THROW(GenerateFrame(s, 4, 40), IndexError);
}

TEST(SceneScriptTest, TextRoundTrip) {
  const SceneScript s = DefaultDynamicScene(0.15, 9);
  const std::string text = SceneScriptToText(s);
  const SceneScript back = ParseSceneScript(text);
  EXPECT_EQ(SceneScriptToText(back), text);
  EXPECT_EQ(back.dynamics.size(), 3u);
  EXPECT_EQ(back.label_flip_p, 0.15);
}

TEST(SceneScriptTest, InvalidScriptsThrow) {
  EXPECT_THROW(ParseSceneScript("{"), InvalidArgumentError);
  EXPECT_THROW(ParseSceneScript(R"({"colour": 3})"), InvalidArgumentError);
  EXPECT_THROW(ParseSceneScript(R"({"noise": {"label_flip_p": 1.5}})"), InvalidArgumentError);
  EXPECT_THROW(ParseSceneScript(R"({"frames": 0})"), InvalidArgumentError);
  EXPECT_THROW(ParseSceneScript(
                   R"({"world": {"min": [0, 0, 0], "max": [1, 1, 1]},
                       "ground": null,
                       "static": [{"min": [0, 0, 0], "max": [2, 1, 1], "label": 1}]})"),
               InvalidArgumentError);
  SceneScript s = MovingBoxScene(Vec3(50.0, 0.0, 0.0), 40);
  s.world_min = Vec3::Constant(-100.0);
  s.world_max = Vec3::Constant(100.0);
  EXPECT_THROW(s.Validate(), InvalidArgumentError);
  EXPECT_THROW(LoadSceneScript("/nonexistent/scene.json"), IoError);
}

PipelineConfig Config(const SceneScript& s) {
  PipelineConfig c;
  c.classes = {s.num_classes, s.free_class};
  c.dynamic_classes = s.DynamicClasses();
  c.num_layers = 1;
  return c;
}

TEST(PipelineTest, NoiselessStaticRunIsPerfect) {
  SceneScript s = DefaultStaticScene(0.0, 0);
  s.frame_count = 12;
  const PipelineResult r = RunPipeline(s, 0, Config(s));
  EXPECT_EQ(r.report.fused.Mstcv(true), 0.0);
  EXPECT_EQ(r.report.fused.Mstcv(false), 0.0);
  EXPECT_EQ(r.report.raw.Mstcv(false), 0.0);
  EXPECT_EQ(r.report.iou.mean, 1.0);
  EXPECT_EQ(r.report.frames, 12);
}

TEST(PipelineTest, WindowOfOneIsPerFrameSurrogate) {
  SceneScript s = DefaultStaticScene(0.3, 2);
  s.frame_count = 6;
  PipelineConfig c = Config(s);
  c.k = 1;
  c.keep_frames = true;
  const auto frames = GenerateScene(s, 2);
  const PipelineResult r = RunPipeline(frames, c);
  ASSERT_EQ(r.frames.predictions.size(), frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const VoxelGrid& act = frames[t].activation;
    for (std::int64_t i = 0; i < act.spec().Cells(); ++i) {
      const auto row = act.At(i);
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      ASSERT_EQ(r.frames.predictions[t][i], best) << "frame " << t;
    }
    EXPECT_EQ(r.frames.raw_predictions[t], frames[t].prediction);
  }
}

TEST(PipelineTest, FusionReducesInconsistency) {
  SceneScript s = DefaultStaticScene(0.2, 5);
  s.frame_count = 15;
  const PipelineResult r = RunPipeline(s, 5, Config(s));
  EXPECT_LT(r.report.fused.Mstcv(true), r.report.raw.Mstcv(true));
}

TEST(PipelineTest, RunsAreDeterministic) {
  SceneScript s = DefaultDynamicScene(0.2, 6);
  s.frame_count = 8;
  const PipelineResult a = RunPipeline(s, 6, Config(s));
  const PipelineResult b = RunPipeline(s, 6, Config(s));
  EXPECT_EQ(MetricsCsv(a.report), MetricsCsv(b.report));
  EXPECT_EQ(FramesCsv(a.report), FramesCsv(b.report));
  EXPECT_EQ(SummaryText(a.report), SummaryText(b.report));
  EXPECT_EQ(a.memory.predictions(), b.memory.predictions());
  EXPECT_TRUE(std::equal(a.memory.features().data().begin(), a.memory.features().data().end(),
                         b.memory.features().data().begin()));
}

TEST(PipelineTest, QueueParadigmsRun) {
  SceneScript s = DefaultStaticScene(0.2, 7);
  s.frame_count = 5;
  for (Paradigm p : {Paradigm::kRecurrent, Paradigm::kStacked}) {
    PipelineConfig c = Config(s);
    c.paradigm = p;
    c.k = 3;
    const PipelineResult r = RunPipeline(s, 7, c);
    EXPECT_EQ(r.report.fused.frames(), 5u);
  }
}

TEST(PipelineTest, ErrorsCarryFrameIndex) {
  SceneScript s = DefaultStaticScene(0.0, 0);
  s.frame_count = 3;
  auto frames = GenerateScene(s, 0);
  frames[1].prediction = LabelGrid(GridSpec{}, 0);
  try {
    RunPipeline(frames, Config(s));
    FAIL() << "expected an error";
  } catch (const InvalidArgumentError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("frame 1: ", 0), 0u) << e.what();
  }
  PipelineConfig bad = Config(s);
  bad.alpha = 2.0;
  EXPECT_THROW(RunPipeline(GenerateScene(s, 0), bad), InvalidArgumentError);
}

}  // namespace
}  // namespace stocc
