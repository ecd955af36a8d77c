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

#include <random>

#include <gtest/gtest.h>

#include "stocc/common.h"
#include "stcv_oracle.h"

namespace stocc {
namespace {

constexpr std::uint8_t kA = 0;
constexpr std::uint8_t kB = 1;
constexpr std::uint8_t kFree = 2;
const ClassSet kThree{3, 2};

GridSpec Row(int w) {
  GridSpec s;
  s.voxel_size = 1.0;
  s.dims = {1, w, 1};
  s.channels = 1;
  return s;
}

LabelGrid Labels(std::initializer_list<std::uint8_t> values) {
  LabelGrid g(Row(static_cast<int>(values.size())), 0);
  std::int64_t i = 0;
  for (std::uint8_t v : values) g[i++] = v;
  return g;
}

TEST(MiouTest, IdentityIsPerfect) {
  const LabelGrid g = Labels({kA, kB, kFree, kA});
  IouAccumulator acc(kThree);
  acc.Add(g, g);
  const IouReport r = acc.Compute();
  EXPECT_EQ(r.mean, 1.0);
  EXPECT_EQ(r.present_classes, 2);
}

TEST(MiouTest, DisjointIsZero) {
  IouAccumulator acc(kThree);
  acc.Add(Labels({kA, kA}), Labels({kB, kB}));
  const IouReport r = acc.Compute();
  EXPECT_EQ(*r.per_class[kA], 0.0);
  EXPECT_EQ(*r.per_class[kB], 0.0);
  EXPECT_EQ(r.mean, 0.0);
}

TEST(MiouTest, HandCountedHalf) {
  IouAccumulator acc(ClassSet{2, 1});
  acc.Add(Labels({0, 0}), Labels({0, 1}));
  const IouReport r = acc.Compute();
  EXPECT_EQ(*r.per_class[0], 0.5);
  EXPECT_EQ(r.mean, 0.5);
}

TEST(MiouTest, MatchesConfusionMatrix) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> label(0, 4);
  std::bernoulli_distribution visible(0.7);
  const ClassSet classes{5, 4};
  std::vector<LabelGrid> preds, gts, masks;
  std::vector<std::vector<std::int64_t>> confusion(5, std::vector<std::int64_t>(5, 0));
  for (int f = 0; f < 4; ++f) {
    LabelGrid p(Row(50), 0), g(Row(50), 0), m(Row(50), 0);
    for (int i = 0; i < 50; ++i) {
      p[i] = static_cast<std::uint8_t>(label(rng));
      g[i] = static_cast<std::uint8_t>(label(rng));
      m[i] = visible(rng) ? 1 : 0;
      if (m[i]) ++confusion[g[i]][p[i]];
    }
    preds.push_back(p);
    gts.push_back(g);
    masks.push_back(m);
  }
  const IouReport r = Miou(preds, gts, masks, true, classes);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < 5; ++c) {
    std::int64_t tp = confusion[c][c], row = 0, col = 0;
    for (int k = 0; k < 5; ++k) {
      row += confusion[c][k];
      col += confusion[k][c];
    }
    const std::int64_t uni = row + col - tp;
    if (uni == 0) {
      EXPECT_FALSE(r.per_class[c].has_value());
      continue;
    }
    const double iou = static_cast<double>(tp) / uni;
    EXPECT_DOUBLE_EQ(*r.per_class[c], iou);
    if (c != classes.free_class) {
      sum += iou;
      ++present;
    }
  }
  EXPECT_DOUBLE_EQ(r.mean, sum / present);
}

TEST(MiouTest, AbsentClassExcluded) {
  IouAccumulator acc(kThree);
  acc.Add(Labels({kA, kFree}), Labels({kA, kFree}));
  const IouReport r = acc.Compute();
  EXPECT_FALSE(r.per_class[kB].has_value());
  EXPECT_EQ(r.present_classes, 1);
}

TEST(MiouTest, Errors) {
  IouAccumulator acc(kThree);
  EXPECT_THROW(acc.Add(Labels({kA}), Labels({kA, kA})), InvalidArgumentError);
  EXPECT_THROW(acc.Add(Labels({7}), Labels({kA})), InvalidArgumentError);
  EXPECT_THROW(IouAccumulator(ClassSet{3, 3}), InvalidArgumentError);
  const std::vector<LabelGrid> one{Labels({kA})};
  EXPECT_THROW(Miou(one, one, {}, true, kThree), InvalidArgumentError);
}

TEST(StcvTest, HandEnumeratedRow) {
  const StcvCounts c =
      CountStcv(Labels({kA, kA, kB, kFree}), Labels({kA, kB, kB, kB}), nullptr, kThree);
  EXPECT_EQ(c.flips, 1);
  EXPECT_EQ(c.non_free, 4);
  EXPECT_EQ(c.value(), 0.25);
  EXPECT_EQ(c.flips_by_class[kA], 1);
}

TEST(StcvTest, MaskRestrictsBothCounts) {
  const LabelGrid vis = Labels({1, 0, 1, 1});
  const StcvCounts c =
      CountStcv(Labels({kA, kA, kB, kFree}), Labels({kA, kB, kB, kB}), &vis, kThree);
  EXPECT_EQ(c.flips, 0);
  EXPECT_EQ(c.non_free, 3);
}

TEST(StcvTest, EmptyDenominatorIsZero) {
  EXPECT_EQ(CountStcv(Labels({kA}), Labels({kFree}), nullptr, kThree).value(), 0.0);
}

TEST(StcvTest, FirstFrameAndStaticRepeatAreZero) {
  GridSpec spec = Row(4);
  MemoryLayout layout;
  layout.feature_channels = 0;
  layout.num_classes = 3;
  layout.free_class = 2;
  const std::vector<Pose> poses{Pose::Identity(), Pose::Identity()};
  SceneMemory mem = SceneMemory::Allocate(poses, spec, layout);
  const LabelGrid p = Labels({kA, kB, kB, kA});
  EXPECT_EQ(StcvFrame(mem, poses[0], p, nullptr, false).value(), 0.0);
  FrameWrite w;
  w.predictions = &p;
  WriteRoi(mem, poses[0], w);
  EXPECT_EQ(StcvFrame(mem, poses[1], p, nullptr, false).value(), 0.0);
  EXPECT_THROW(StcvFrame(mem, poses[1], p, nullptr, true), InvalidArgumentError);
}

TEST(StcvTest, MatchesCorrespondenceOracle) {
  std::mt19937_64 rng(2026);
  for (int trial = 0; trial < 300; ++trial) {
    const testing::LatticeCase c = testing::RandomLatticeCase(rng);
    const ConsistencyLedger ledger = testing::MemoryStcv(c);
    for (bool masked : {true, false}) {
      const std::vector<double> expected = testing::OracleStcv(c, masked);
      const auto got = ledger.stcv(masked);
      ASSERT_EQ(got.size(), expected.size());
      for (std::size_t t = 0; t < expected.size(); ++t) {
        ASSERT_EQ(got[t], expected[t]) << "trial " << trial << " frame " << t;
      }
      ASSERT_EQ(ledger.Mstcv(masked), Mstcv(expected));
    }
  }
}

TEST(MstcvTest, Mean) {
  EXPECT_EQ(Mstcv(std::vector<double>{0.0, 0.0}), 0.0);
  EXPECT_NEAR(Mstcv(std::vector<double>{0.1, 0.3}), 0.2, 1e-15);
  EXPECT_EQ(Mstcv(std::vector<double>{}), 0.0);
}

TEST(RelativeStcvTest, Ratios) {
  ConsistencyLedger base(3), same(3), half(3);
  StcvCounts b;
  b.flips_by_class = {4, 0, 0};
  StcvCounts h;
  h.flips_by_class = {2, 0, 0};
  base.AddFrame(b, b);
  same.AddFrame(b, b);
  half.AddFrame(h, h);
  const auto r1 = RelativeClassStcv(same, base, true);
  EXPECT_EQ(*r1[0], 1.0);
  EXPECT_FALSE(r1[1].has_value());
  EXPECT_EQ(*RelativeClassStcv(half, base, false)[0], 0.5);
  EXPECT_THROW(RelativeClassStcv(ConsistencyLedger(4), base, true), InvalidArgumentError);
}

TEST(RelativeStcvTest, TwoClassBruteForce) {
  // Flips are attributed to the remembered class.
  const ClassSet two{3, 2};
  const LabelGrid prev = Labels({kA, kA, kB, kB, kA});
  const LabelGrid method_cur = Labels({kA, kB, kB, kA, kA});
  const LabelGrid base_cur = Labels({kB, kB, kA, kA, kA});
  ConsistencyLedger method(3), base(3);
  const StcvCounts m = CountStcv(prev, method_cur, nullptr, two);
  const StcvCounts b = CountStcv(prev, base_cur, nullptr, two);
  method.AddFrame(m, m);
  base.AddFrame(b, b);
  // Method flips: A->B at 1, B->A at 3. Baseline: A->B at 0, 1 and B->A at 2, 3.
  const auto r = RelativeClassStcv(method, base, true);
  EXPECT_EQ(*r[kA], 1.0 / 2.0);
  EXPECT_EQ(*r[kB], 1.0 / 2.0);
}

class ExtendedScopeTest : public ::testing::Test {
 protected:
  void SetUp() override {
    layout_.feature_channels = 0;
    layout_.num_classes = 3;
    layout_.free_class = 2;
    poses_ = {Pose::Identity(0), Pose::Translation(1.0, 0.0, 0.0, 1)};
    mem_ = SceneMemory::Allocate(poses_, Row(4), layout_);
  }
  MemoryLayout layout_;
  std::vector<Pose> poses_;
  SceneMemory mem_;
};

TEST_F(ExtendedScopeTest, NoHistoryKeepsCurrentMask) {
  const LabelGrid vis = Labels({1, 0, 1, 0});
  EXPECT_EQ(ExtendedEvalScope(vis, mem_, poses_[0], Labels({0, 0, 0, 0})), vis);
}

TEST_F(ExtendedScopeTest, UnionWithShiftedHistory) {
  const LabelGrid first_vis = Labels({0, 1, 1, 0});
  FrameWrite w;
  w.visibility = &first_vis;
  WriteRoi(mem_, poses_[0], w);
  // Frame 1 is one cell to the right: its cells 0..2 map to frame-0 cells 1..3.
  const LabelGrid cur = Labels({0, 0, 0, 1});
  EXPECT_EQ(ExtendedEvalScope(cur, mem_, poses_[1], Labels({0, 0, 0, 0})),
            Labels({1, 1, 0, 1}));
}

TEST_F(ExtendedScopeTest, DynamicHistoryExcluded) {
  const LabelGrid first_vis = Labels({1, 1, 1, 1});
  FrameWrite w;
  w.visibility = &first_vis;
  WriteRoi(mem_, poses_[0], w);
  const LabelGrid cur = Labels({0, 0, 0, 0});
  EXPECT_EQ(ExtendedEvalScope(cur, mem_, poses_[1], Labels({0, 1, 0, 0})),
            Labels({1, 0, 1, 0}));
}

}  // namespace
}  // namespace stocc
