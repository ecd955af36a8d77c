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
#include "stocc/grid_io.h"

#include <cstring>
#include <filesystem>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "stocc/common.h"

namespace stocc {
namespace {

GridSpec Spec(int channels) {
  GridSpec s;
  s.origin = Vec3(-12.5, 3.25, -1.0);
  s.voxel_size = 0.4;
  s.dims = {3, 4, 2};
  s.channels = channels;
  return s;
}

TEST(OcgTest, HeaderLayout) {
  VoxelGrid g(Spec(5));
  const auto bytes = EncodeOcg(g);
  ASSERT_EQ(bytes.size(), kOcgHeaderBytes + 3 * 4 * 2 * 5 * 4);
  EXPECT_EQ(std::memcmp(bytes.data(), "OCG1", 4), 0);
  std::uint32_t h = 0;
  std::memcpy(&h, bytes.data() + 4, 4);
  EXPECT_EQ(h, 3u);
  double origin_x = 0.0;
  std::memcpy(&origin_x, bytes.data() + 24, 8);
  EXPECT_EQ(origin_x, -12.5);
}

TEST(OcgTest, VoxelRoundTripAtFloatPrecision) {
  VoxelGrid g(Spec(2));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (double& v : g.data()) v = static_cast<float>(n(rng));
  const auto decoded = DecodeOcg(EncodeOcg(g));
  const VoxelGrid& back = std::get<VoxelGrid>(decoded);
  EXPECT_EQ(back.spec().dims, g.spec().dims);
  EXPECT_EQ(back.spec().origin, g.spec().origin);
  EXPECT_EQ(back.spec().voxel_size, g.spec().voxel_size);
  ASSERT_EQ(back.data().size(), g.data().size());
  for (std::size_t i = 0; i < g.data().size(); ++i) EXPECT_EQ(back.data()[i], g.data()[i]);
}

TEST(OcgTest, LabelRoundTrip) {
  LabelGrid g(Spec(1), 17);
  g(1, 2, 1) = 4;
  const auto decoded = DecodeOcg(EncodeOcg(g));
  EXPECT_TRUE(std::get<LabelGrid>(decoded) == g);
  EXPECT_EQ(DecodeOcgHeader(EncodeOcg(g)).dtype, OcgDtype::kLabel8);
}

TEST(OcgTest, TruncatedInputThrows) {
  VoxelGrid g(Spec(2), 1.0);
  auto bytes = EncodeOcg(g);
  for (std::size_t keep : {std::size_t{0}, std::size_t{3}, kOcgHeaderBytes - 1,
                           kOcgHeaderBytes, bytes.size() - 1}) {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<long>(keep));
    EXPECT_THROW(DecodeOcg(cut), IoError) << keep;
  }
  bytes.push_back(0);
  EXPECT_THROW(DecodeOcg(bytes), IoError);
}

TEST(OcgTest, BadMagicThrows) {
  auto bytes = EncodeOcg(VoxelGrid(Spec(1)));
  bytes[3] = '2';
  EXPECT_THROW(DecodeOcgHeader(bytes), IoError);
}

TEST(OcgTest, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "stocc_grid_io_test";
  std::filesystem::create_directories(dir);
  LabelGrid g(Spec(1), 3);
  WriteOcg(dir / "l.ocg", g);
  EXPECT_TRUE(ReadOcgLabels(dir / "l.ocg") == g);
  EXPECT_THROW(ReadOcgVoxels(dir / "l.ocg"), IoError);
  EXPECT_THROW(ReadOcg(dir / "missing.ocg"), IoError);
  std::filesystem::remove_all(dir);
}

TEST(PoseFileTest, RoundTripIsExact) {
  std::vector<Pose> poses;
  for (int t = 0; t < 5; ++t) {
    poses.push_back(Pose::RotZ(0.1 * t + std::numbers::pi / 7, Vec3(0.4 * t, -1.0 / 3.0, 0.0), t));
  }
  const auto back = ParsePoses(FormatPoses(poses));
  ASSERT_EQ(back.size(), poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    EXPECT_EQ(back[i].matrix(), poses[i].matrix());
  }
}

TEST(PoseFileTest, MalformedTextThrows) {
  EXPECT_THROW(ParsePoses("1 0 0 0 0 1 0 0\n"), InvalidArgumentError);
  EXPECT_THROW(ParsePoses("1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 2\n"), InvalidArgumentError);
}

}  // namespace
}  // namespace stocc
