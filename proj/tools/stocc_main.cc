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
// stocc: simulate, evaluate, benchmark and inspect scene-memory runs.
//
// Exit codes: 0 success, 2 bad input, 3 internal invariant violation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stocc/bench.h"
#include "stocc/common.h"
#include "stocc/grid_io.h"
#include "stocc/losses.h"
#include "stocc/pipeline.h"
#include "stocc/simulator.h"

namespace {

using namespace stocc;
namespace fs = std::filesystem;

constexpr int kInputError = 2;
constexpr int kInvariantError = 3;

GridDims ParseGridDims(const std::string& text) {
  static const std::regex re(R"((\d+)x(\d+)x(\d+))");
  std::smatch m;
  if (!std::regex_match(text, m, re)) {
    throw InvalidArgumentError("--grid expects HxWxZ, got '" + text + "'");
  }
  GridDims d{std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3])};
  if (d.h < 1 || d.w < 1 || d.z < 1) throw InvalidArgumentError("--grid dims must be >= 1");
  return d;
}

void WriteText(const fs::path& path, const std::string& text) {
  WriteFileBytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

struct SimulateArgs {
  std::string scene;
  double alpha = 0.5;
  int frames = 0;
  std::string paradigm = "unified";
  std::string grid;
  std::optional<std::uint64_t> seed;
  std::optional<double> flip_p;
  std::string out = "stocc_out";
  bool mask = true;
  bool extended_eval = false;
  bool attention = true;
  bool dump_frames = false;
};

int Simulate(const SimulateArgs& a) {
  if (!(a.alpha >= 0.0 && a.alpha <= 1.0)) throw InvalidArgumentError("--alpha must be in [0, 1]");
  if (a.frames < 0) throw InvalidArgumentError("--frames must be >= 1");
  SceneScript script = a.scene.empty() ? DefaultStaticScene(0.2, 0) : LoadSceneScript(a.scene);
  if (a.flip_p) script.label_flip_p = *a.flip_p;
  if (!a.grid.empty()) {
    const GridDims d = ParseGridDims(a.grid);
    script.grid = SceneScript::DefaultGrid(d.h, d.w, d.z, script.grid.voxel_size);
  }
  script.Validate();
  const std::uint64_t seed = a.seed.value_or(script.seed);

  PipelineConfig config;
  config.alpha = a.alpha;
  config.k = a.frames;
  config.paradigm = ParseParadigm(a.paradigm);
  config.use_attention = a.attention;
  config.param_seed = seed;
  config.keep_frames = a.dump_frames;
  const PipelineResult result = RunPipeline(script, seed, config);
  const PipelineReport& r = result.report;

  const fs::path out(a.out);
  fs::create_directories(out);
  WriteText(out / "metrics.csv", MetricsCsv(r));
  WriteText(out / "frames.csv", FramesCsv(r));
  WriteText(out / "summary.json", SummaryText(r));
  WriteText(out / "scene.json", SceneScriptToText(script));
  WriteMemoryDump(out / "memory", result.memory, r);
  if (a.dump_frames) WriteEvalDump(out / "eval", result.frames);

  std::printf("frames %d  k %d  alpha %.3f  paradigm %s  delta %.4f\n", r.frames, r.k,
              r.alpha, ParadigmName(r.paradigm).c_str(), r.delta);
  std::printf("mIoU %.6f", r.iou.mean);
  if (a.extended_eval) std::printf("  mIoU(extended) %.6f", r.iou_extended.mean);
  std::printf("  raw mIoU %.6f\n", r.raw_iou.mean);
  std::printf("mSTCV%s %.6f  raw %.6f\n", a.mask ? "" : "(unmasked)",
              r.fused.Mstcv(a.mask), r.raw.Mstcv(a.mask));
  std::printf("wrote %s\n", out.string().c_str());
  return 0;
}

struct EvalArgs {
  std::string in;
  std::string out;
  int classes = 18;
  int free_class = 17;
  bool mask = true;
  bool extended_eval = false;
};

int Eval(const EvalArgs& a) {
  const ClassSet classes{a.classes, a.free_class};
  if (classes.num_classes < 1 || classes.free_class < 0 ||
      classes.free_class >= classes.num_classes) {
    throw InvalidArgumentError("invalid --classes/--free");
  }
  const EvalReport r = EvaluateDump(a.in, classes);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    WriteText(fs::path(a.out) / "eval.csv", EvalCsv(r, classes));
    WriteText(fs::path(a.out) / "summary.json", EvalSummaryText(r));
  }
  std::printf("frames %d\n", r.frames);
  std::printf("mIoU %.6f", r.iou.mean);
  if (a.extended_eval) std::printf("  mIoU(extended) %.6f", r.iou_extended.mean);
  std::printf("\nmSTCV%s %.6f\n", a.mask ? "" : "(unmasked)", r.ledger.Mstcv(a.mask));
  return 0;
}

struct BenchArgs {
  std::vector<int> k_list = {4, 8, 16, 40};
  std::vector<std::string> paradigms = {"recurrent", "stacked", "unified"};
  std::string grid = "50x50x4";
  int channels = 16;
  int repeats = 3;
  std::uint64_t seed = 0;
  std::string out = "stocc_bench";
};

int Bench(const BenchArgs& a) {
  BenchConfig config;
  config.k_list = a.k_list;
  config.paradigms.clear();
  for (const std::string& p : a.paradigms) config.paradigms.push_back(ParseParadigm(p));
  const GridDims d = ParseGridDims(a.grid);
  config.grid.dims = d;
  config.grid.channels = a.channels;
  config.grid.origin = Vec3(-0.5 * d.w * config.grid.voxel_size,
                            -0.5 * d.h * config.grid.voxel_size, -1.0);
  config.repeats = a.repeats;
  config.seed = a.seed;
  const std::vector<BenchRow> rows = RunBenchmark(config);
  fs::create_directories(a.out);
  WriteText(fs::path(a.out) / "bench.csv", BenchCsv(rows));
  WriteText(fs::path(a.out) / "bench.svg", BenchSvg(rows));
  std::cout << BenchCsv(rows);
  return 0;
}

struct InspectArgs {
  std::string path;
  int classes = 18;
};

int Inspect(const InspectArgs& a) {
  const std::vector<std::uint8_t> bytes = ReadFileBytes(a.path);
  const OcgHeader h = DecodeOcgHeader(bytes);
  const OcgContents contents = DecodeOcg(bytes);
  const GridSpec& s = h.spec;
  std::printf("magic OCG1\ndims H=%d W=%d Z=%d C=%d\ndtype %s\n", s.dims.h, s.dims.w,
              s.dims.z, s.channels, h.dtype == OcgDtype::kFloat32 ? "f32" : "u8");
  std::printf("origin %.6f %.6f %.6f\nvoxel_size %.6f\n", s.origin.x(), s.origin.y(),
              s.origin.z(), s.voxel_size);
  if (const auto* labels = std::get_if<LabelGrid>(&contents)) {
    std::vector<std::int64_t> hist(256, 0);
    for (std::uint8_t v : labels->data()) ++hist[v];
    for (int v = 0; v < 256; ++v) {
      if (hist[v] > 0) std::printf("label %d count %lld\n", v, static_cast<long long>(hist[v]));
    }
    return 0;
  }
  const VoxelGrid& g = std::get<VoxelGrid>(contents);
  for (int c = 0; c < g.channels(); ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
    for (std::int64_t cell = 0; cell < s.Cells(); ++cell) {
      const double v = g.At(cell)[c];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    std::printf("channel %d min %.6g max %.6g mean %.6g\n", c, lo, hi,
                sum / static_cast<double>(s.Cells()));
  }
  // An attribute plane holds N activations, delta and two flow channels.
  if (g.channels() == a.classes + 3) {
    std::int64_t written = 0, violations = 0;
    for (std::int64_t cell = 0; cell < s.Cells(); ++cell) {
      const auto v = g.At(cell);
      double total = 0.0;
      bool negative = false;
      for (int c = 0; c < a.classes; ++c) {
        total += v[c];
        negative |= v[c] < 0.0;
      }
      if (total == 0.0 && !negative) continue;  // never written
      ++written;
      // Dumps are 32-bit, so allow for float rounding of each entry.
      if (negative || std::abs(total - 1.0) > 1e-5) ++violations;
    }
    std::printf("activation voxels %lld simplex violations %lld\n",
                static_cast<long long>(written), static_cast<long long>(violations));
  }
  return 0;
}

int LossCheck(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  const int n = 18, voxels = 64;
  std::vector<double> logits(static_cast<std::size_t>(n) * voxels);
  std::vector<int> targets(voxels);
  for (double& v : logits) v = uni(rng);
  for (int& t : targets) t = static_cast<int>(rng() % n);
  const double focal = FocalLoss(logits, targets, n, 0.0);
  const double ce = CrossEntropy(logits, targets, n);
  std::printf("focal(gamma=0) %.12f  cross-entropy %.12f  diff %.3g\n", focal, ce,
              std::abs(focal - ce));

  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double s = uni(rng), r = uni(rng);
    const double g = GaussianNll(std::vector<double>{s}, std::vector<double>{r}).grad_log_variance[0];
    const double h = 1e-5;
    const double fd = (GaussianNll(std::vector<double>{s + h}, std::vector<double>{r}).loss -
                       GaussianNll(std::vector<double>{s - h}, std::vector<double>{r}).loss) /
                      (2 * h);
    worst = std::max(worst, std::abs(g - fd) / std::max(1.0, std::abs(fd)));
  }
  std::printf("nll gradient max relative error %.3g over 1000 points\n", worst);
  const bool ok = std::abs(focal - ce) <= 1e-9 && worst <= 1e-5;
  std::printf("%s\n", ok ? "ok" : "MISMATCH");
  if (!ok) throw InvariantError("loss self-check failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stocc: scene-centered occupancy memory engine"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read option defaults from a TOML/INI file; flags override it");

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "generate a scene and run the pipeline");
  simulate->add_option("--scene", sim.scene, "scene script (JSON); default noisy static scene")
      ->check(CLI::ExistingFile);
  simulate->add_option("--alpha", sim.alpha, "decay factor in [0, 1]");
  simulate->add_option("--frames", sim.frames, "temporal window k; 0 = whole sequence, 1 = off");
  simulate->add_option("--paradigm", sim.paradigm, "recurrent|stacked|unified");
  simulate->add_option("--grid", sim.grid, "ego grid HxWxZ");
  simulate->add_option("--seed", sim.seed, "random seed (default: the script's)");
  simulate->add_option("--flip-p", sim.flip_p, "override the label-flip probability");
  simulate->add_option("--out", sim.out, "output directory");
  simulate->add_flag("--mask,!--no-mask", sim.mask, "report the visibility-masked mSTCV");
  simulate->add_flag("--extended-eval", sim.extended_eval, "report extended-scope mIoU");
  simulate->add_flag("!--no-attention", sim.attention, "skip memory attention on features");
  simulate->add_flag("--dump-frames", sim.dump_frames, "write per-frame OCG1 dumps for eval");

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand("eval", "evaluate per-frame OCG1 dumps");
  eval->add_option("--in", ev.in, "dump directory (poses.txt, pred/, gt/, vis/)")->required();
  eval->add_option("--out", ev.out, "output directory for eval.csv and summary.json");
  eval->add_option("--classes", ev.classes, "number of classes");
  eval->add_option("--free", ev.free_class, "free class index");
  eval->add_flag("--mask,!--no-mask", ev.mask, "report the visibility-masked mSTCV");
  eval->add_flag("--extended-eval", ev.extended_eval, "report extended-scope mIoU");

  BenchArgs be;
  CLI::App* bench = app.add_subcommand("bench", "storage and fusion-time scaling");
  bench->add_option("--k", be.k_list, "window sizes")->delimiter(',');
  bench->add_option("--paradigm", be.paradigms, "paradigms to run")->delimiter(',');
  bench->add_option("--grid", be.grid, "grid HxWxZ");
  bench->add_option("--channels", be.channels, "feature channels");
  bench->add_option("--repeats", be.repeats, "timing repeats");
  bench->add_option("--seed", be.seed, "feature seed");
  bench->add_option("--out", be.out, "output directory");

  InspectArgs in;
  CLI::App* inspect = app.add_subcommand("inspect", "print an OCG1 header and channel stats");
  inspect->add_option("path", in.path, "OCG1 file")->required();
  inspect->add_option("--classes", in.classes, "classes in an attribute plane");

  std::uint64_t loss_seed = 0;
  CLI::App* loss = app.add_subcommand("loss-check", "self-check the loss implementations");
  loss->add_option("--seed", loss_seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  try {
    if (*simulate) return Simulate(sim);
    if (*eval) return Eval(ev);
    if (*bench) return Bench(be);
    if (*inspect) return Inspect(in);
    if (*loss) return LossCheck(loss_seed);
  } catch (const InvalidArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInvariantError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInvariantError;
  }
  return kInputError;
}
