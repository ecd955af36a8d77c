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
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <gtest/gtest.h>

#include "stocc/simulator.h"

namespace stocc {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
};

Result Cli(const std::string& args) {
  const std::string cmd = std::string(STOCC_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::path(::testing::TempDir()) / "stocc_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    SceneScript s = DefaultStaticScene(0.2, 11);
    s.frame_count = 6;
    std::ofstream(dir_ / "scene.json") << SceneScriptToText(s);
  }
  static fs::path Scene() { return dir_ / "scene.json"; }
  static fs::path dir_;
};

fs::path CliTest::dir_;

TEST_F(CliTest, SimulateWritesOutputs) {
  const fs::path out = dir_ / "sim";
  const Result r = Cli("simulate --scene " + Scene().string() + " --out " + out.string() +
                       " --dump-frames");
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"metrics.csv", "frames.csv", "summary.json", "scene.json",
                        "memory/features.ocg", "memory/attributes.ocg",
                        "memory/pred_labels.ocg", "memory/gt_labels.ocg",
                        "memory/manifest.json", "eval/poses.txt", "eval/pred/000005.ocg"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_NE(r.out.find("mSTCV"), std::string::npos);
}

TEST_F(CliTest, SimulateIsByteDeterministic) {
  const fs::path a = dir_ / "det_a";
  const fs::path b = dir_ / "det_b";
  const std::string base = "simulate --scene " + Scene().string() + " --seed 4 --out ";
  ASSERT_EQ(Cli(base + a.string()).code, 0);
  ASSERT_EQ(Cli(base + b.string()).code, 0);
  for (const char* f : {"metrics.csv", "frames.csv", "summary.json", "memory/features.ocg",
                        "memory/attributes.ocg", "memory/pred_labels.ocg"}) {
    EXPECT_EQ(Slurp(a / f), Slurp(b / f)) << f;
  }
}

TEST_F(CliTest, EvalOfOwnDumpIsConsistent) {
  const fs::path sim = dir_ / "self";
  ASSERT_EQ(Cli("simulate --scene " + Scene().string() + " --out " + sim.string() +
                " --dump-frames")
                .code,
            0);
  const Result r = Cli("eval --in " + (sim / "eval").string() + " --out " +
                       (dir_ / "self_eval").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("mIoU 1.000000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("mSTCV 0.000000"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir_ / "self_eval" / "eval.csv"));
}

TEST_F(CliTest, InspectReportsSimplexRows) {
  const fs::path sim = dir_ / "inspect";
  ASSERT_EQ(Cli("simulate --scene " + Scene().string() + " --out " + sim.string()).code, 0);
  const Result r = Cli("inspect " + (sim / "memory" / "attributes.ocg").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("simplex violations 0"), std::string::npos) << r.out;
}

TEST_F(CliTest, TruncatedGridIsAnInputError) {
  const fs::path sim = dir_ / "trunc";
  ASSERT_EQ(Cli("simulate --scene " + Scene().string() + " --out " + sim.string()).code, 0);
  std::string bytes = Slurp(sim / "memory" / "pred_labels.ocg");
  bytes.resize(bytes.size() - 7);
  std::ofstream(dir_ / "cut.ocg", std::ios::binary) << bytes;
  const Result r = Cli("inspect " + (dir_ / "cut.ocg").string());
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST_F(CliTest, BadInputsExitWithTwo) {
  EXPECT_EQ(Cli("simulate --scene " + (dir_ / "missing.json").string()).code, 2);
  EXPECT_EQ(Cli("simulate --scene " + Scene().string() + " --paradigm queue --out " +
                (dir_ / "bad").string())
                .code,
            2);
  EXPECT_EQ(Cli("simulate --scene " + Scene().string() + " --alpha 1.5 --out " +
                (dir_ / "bad").string())
                .code,
            2);
  EXPECT_EQ(Cli("simulate --grid 10x10 --out " + (dir_ / "bad").string()).code, 2);
  EXPECT_EQ(Cli("eval --in " + (dir_ / "nothing").string()).code, 2);
  EXPECT_EQ(Cli("frobnicate").code, 2);
  std::ofstream(dir_ / "broken.json") << R"({"frames": 3, "colour": 1})";
  EXPECT_EQ(Cli("simulate --scene " + (dir_ / "broken.json").string()).code, 2);
}

TEST_F(CliTest, ConfigFileSuppliesDefaults) {
  std::ofstream(dir_ / "run.toml") << "[simulate]\nalpha = 0.25\nseed = 2\n";
  const fs::path out = dir_ / "cfg";
  const Result r = Cli("--config " + (dir_ / "run.toml").string() + " simulate --scene " +
                       Scene().string() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(Slurp(out / "summary.json").find("\"alpha\": 0.25"), std::string::npos);
}

TEST_F(CliTest, BenchWritesCsvAndChart) {
  const fs::path out = dir_ / "bench";
  const Result r = Cli("bench --k 2 4 --grid 8x8x2 --channels 4 --repeats 1 --out " +
                       out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string csv = Slurp(out / "bench.csv");
  EXPECT_NE(csv.find("stacked"), std::string::npos);
  EXPECT_NE(csv.find("unified"), std::string::npos);
  EXPECT_NE(Slurp(out / "bench.svg").find("<svg"), std::string::npos);
}

TEST_F(CliTest, LossCheckPasses) {
  const Result r = Cli("loss-check");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("ok"), std::string::npos);
}

}  // namespace
}  // namespace stocc
