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
#include "stocc/pipeline.h"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "stocc/attention.h"
#include "stocc/common.h"
#include "stocc/grid_io.h"
#include "stocc/random.h"

namespace stocc {
namespace {

using nlohmann::json;
using FrameSource = std::function<FrameBundle(int)>;

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string Fmt(const std::optional<double>& v) { return v ? Fmt(*v) : ""; }

std::string FrameName(int t) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d.ocg", t);
  return buf;
}

int Argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

double Mean(std::span<const double> v) {
  return v.empty() ? 0.0 : PairwiseSum(v) / static_cast<double>(v.size());
}

MemoryLayout LabelOnlyLayout(const ClassSet& classes) {
  MemoryLayout layout;
  layout.feature_channels = 0;
  layout.num_classes = classes.num_classes;
  layout.free_class = classes.free_class;
  return layout;
}

GridSpec WithChannels(GridSpec spec, int channels) {
  spec.channels = channels;
  return spec;
}

PipelineResult RunPipelineImpl(int frame_count, std::span<const Pose> trajectory,
                               const FrameSource& frame_at,
                               const PipelineConfig& config) {
  if (frame_count < 1) throw InvalidArgumentError("pipeline needs at least one frame");
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
    throw InvalidArgumentError("alpha must be in [0, 1]");
  }
  if (config.k < 0) throw InvalidArgumentError("k must be >= 1 (or 0 for all frames)");
  const ClassSet& classes = config.classes;
  const int n = classes.num_classes;
  const int k = config.k == 0 ? frame_count : config.k;
  const bool temporal = k > 1;

  FrameBundle first = frame_at(0);
  const int f_channels = first.features.channels();
  const GridSpec frame_spec = WithChannels(first.features.spec(), f_channels);
  MemoryLayout layout;
  layout.feature_channels = f_channels;
  layout.num_classes = n;
  layout.free_class = classes.free_class;

  PipelineResult result{PipelineReport{}, SceneMemory::Allocate(trajectory, frame_spec, layout),
                        PipelineFrames{}};
  SceneMemory& mem = result.memory;
  SequenceEvaluator fused_eval(trajectory, frame_spec, classes, config.dynamic_classes);
  SequenceEvaluator raw_eval(trajectory, frame_spec, classes, config.dynamic_classes);

  const bool attend = temporal && config.paradigm == Paradigm::kUnified && config.use_attention;
  std::optional<AttentionParams> attention;
  std::optional<UncertaintyMlpParams> mlp;
  if (attend) {
    AttentionConfig ac;
    ac.channels = f_channels;
    ac.dims = frame_spec.dims;
    ac.num_layers = config.num_layers;
    ac.num_points = config.num_points;
    ac.seed = config.param_seed;
    attention = AttentionParams::Init(ac);
    mlp = UncertaintyMlpParams::Init(n, MixSeed(config.param_seed, 1));
  }

  PipelineReport& report = result.report;
  report.frames = frame_count;
  report.k = k;
  report.alpha = config.alpha;
  report.paradigm = config.paradigm;
  report.delta = mem.RelativeVolumeChange();
  report.classes = classes;

  std::vector<ParadigmFrame> window;
  for (int t = 0; t < frame_count; ++t) {
    try {
      FrameBundle f = t == 0 ? std::move(first) : frame_at(t);
      if (f.activation.channels() != n) {
        throw InvalidArgumentError("activation has " + std::to_string(f.activation.channels()) +
                                   " channels, expected " + std::to_string(n));
      }
      const Pose& pose = f.pose;
      if (temporal && t > 0 && t % k == 0) mem.ResetTemporalState();

      VoxelGrid fused;
      if (!temporal) {
        fused = f.features;
      } else if (config.paradigm == Paradigm::kUnified) {
        if (attend) {
          MemoryAttentionResult r = MemoryAttentionStep(*attention, *mlp, f.features, mem, pose);
          report.mean_uncertainty.push_back(Mean(r.uncertainty.data()));
          fused = std::move(r.fused);
        } else {
          fused = f.features;
        }
      } else {
        window.push_back(ParadigmFrame{pose, f.features});
        if (window.size() > static_cast<std::size_t>(k)) window.erase(window.begin());
        std::vector<const ParadigmFrame*> view;
        for (const ParadigmFrame& w : window) view.push_back(&w);
        fused = FuseWindow(config.paradigm, view, AverageFuse);
      }

      LabelGrid prediction(frame_spec, static_cast<std::uint8_t>(classes.free_class));
      std::optional<VoxelGrid> history;
      std::optional<LabelGrid> observed;
      if (temporal) {
        history = ExtractRoi(mem, pose, frame_spec, PlaneSet{PlaneSet::kActivation});
        observed = ExtractLabels(mem, pose, frame_spec, LabelPlane::kObserved);
      }
      std::vector<double> mix(n);
      for (std::int64_t cell = 0; cell < prediction.Cells(); ++cell) {
        const auto c_t = f.activation.At(cell);
        int label = Argmax(c_t);
        if (temporal && (*observed)[cell] != 0) {
          const auto c_hist = history->At(cell);
          double total = 0.0;
          for (double v : c_hist) total += v;
          if (total >= 0.5) {
            for (int c = 0; c < n; ++c) {
              mix[c] = config.alpha * c_t[c] + (1.0 - config.alpha) * c_hist[c];
            }
            label = Argmax(mix);
          }
        }
        prediction[cell] = static_cast<std::uint8_t>(label);
      }

      fused_eval.AddFrame(pose, prediction, f.ground_truth, f.visibility, &f.dynamic_mask);
      raw_eval.AddFrame(pose, f.prediction, f.ground_truth, f.visibility, &f.dynamic_mask);

      DecayUpdateClassActivation(mem, pose, f.activation, config.alpha);
      const VoxelGrid delta = MeanLogVariance(f.log_variance);
      FrameWrite write;
      write.features = &fused;
      write.log_variance = &delta;
      write.flow = &f.flow;
      write.predictions = &prediction;
      write.ground_truth = &f.ground_truth;
      write.visibility = &f.visibility;
      WriteRoi(mem, pose, write);

      if (config.keep_frames) {
        PipelineFrames& kept = result.frames;
        kept.poses.push_back(pose);
        kept.predictions.push_back(std::move(prediction));
        kept.raw_predictions.push_back(std::move(f.prediction));
        kept.ground_truth.push_back(std::move(f.ground_truth));
        kept.visibility.push_back(std::move(f.visibility));
        kept.dynamic_mask.push_back(std::move(f.dynamic_mask));
      }
    } catch (const InvalidArgumentError& e) {
      throw InvalidArgumentError("frame " + std::to_string(t) + ": " + e.what());
    } catch (const InvariantError& e) {
      throw InvariantError("frame " + std::to_string(t) + ": " + e.what());
    }
  }

  report.fused = fused_eval.ledger();
  report.raw = raw_eval.ledger();
  report.iou = fused_eval.Iou(false);
  report.iou_extended = fused_eval.Iou(true);
  report.raw_iou = raw_eval.Iou(false);
  return result;
}

}  // namespace

SequenceEvaluator::SequenceEvaluator(std::span<const Pose> trajectory,
                                     const GridSpec& frame_spec,
                                     const ClassSet& classes,
                                     std::vector<int> dynamic_classes)
    : classes_(classes),
      is_dynamic_(static_cast<std::size_t>(std::max(classes.num_classes, 0)), 0),
      mem_(SceneMemory::Allocate(trajectory, WithChannels(frame_spec, 0),
                                 LabelOnlyLayout(classes))),
      ledger_(classes.num_classes),
      iou_(classes),
      iou_extended_(classes) {
  for (int c : dynamic_classes) {
    if (c < 0 || c >= classes.num_classes) {
      throw InvalidArgumentError("dynamic class " + std::to_string(c) + " out of range");
    }
    is_dynamic_[static_cast<std::size_t>(c)] = 1;
  }
}

void SequenceEvaluator::AddFrame(const Pose& pose, const LabelGrid& prediction,
                                 const LabelGrid& ground_truth,
                                 const LabelGrid& visibility,
                                 const LabelGrid* dynamic_mask) {
  const GridSpec& fs = mem_.frame_spec();
  for (const LabelGrid* g : {&prediction, &ground_truth, &visibility, dynamic_mask}) {
    if (g && g->spec().dims != fs.dims) {
      throw InvalidArgumentError("evaluation grid dims differ from the sequence");
    }
  }
  const LabelGrid previous = ExtractLabels(mem_, pose, fs, LabelPlane::kPrediction);
  ledger_.AddFrame(CountStcv(previous, prediction, &visibility, classes_),
                   CountStcv(previous, prediction, nullptr, classes_));
  iou_.Add(prediction, ground_truth, &visibility);

  LabelGrid excluded = dynamic_mask ? *dynamic_mask : LabelGrid(fs, 0);
  const LabelGrid remembered = ExtractLabels(mem_, pose, fs, LabelPlane::kGroundTruth);
  for (std::int64_t i = 0; i < excluded.Cells(); ++i) {
    if (remembered[i] < is_dynamic_.size() && is_dynamic_[remembered[i]]) excluded[i] = 1;
  }
  const LabelGrid scope = ExtendedEvalScope(visibility, mem_, pose, excluded);
  iou_extended_.Add(prediction, ground_truth, &scope);

  FrameWrite write;
  write.predictions = &prediction;
  write.ground_truth = &ground_truth;
  write.visibility = &visibility;
  WriteRoi(mem_, pose, write);
}

PipelineResult RunPipeline(std::span<const FrameBundle> frames,
                           const PipelineConfig& config) {
  std::vector<Pose> trajectory;
  for (const FrameBundle& f : frames) trajectory.push_back(f.pose);
  return RunPipelineImpl(static_cast<int>(frames.size()), trajectory,
                         [&](int t) { return frames[static_cast<std::size_t>(t)]; },
                         config);
}

PipelineResult RunPipeline(const SceneScript& script, std::uint64_t seed,
                           const PipelineConfig& config) {
  script.Validate();
  const std::vector<Pose> trajectory = script.Trajectory();
  PipelineConfig cfg = config;
  cfg.classes = ClassSet{script.num_classes, script.free_class};
  if (cfg.dynamic_classes.empty()) cfg.dynamic_classes = script.DynamicClasses();
  return RunPipelineImpl(script.frame_count, trajectory,
                         [&](int t) { return GenerateFrame(script, seed, t); }, cfg);
}

std::string MetricsCsv(const PipelineReport& r) {
  const auto rel_masked = RelativeClassStcv(r.fused, r.raw, true);
  const auto rel_unmasked = RelativeClassStcv(r.fused, r.raw, false);
  std::ostringstream out;
  out << "class,iou,iou_extended,raw_iou,fused_flips_masked,raw_flips_masked,"
         "relative_stcv_masked,fused_flips_unmasked,raw_flips_unmasked,"
         "relative_stcv_unmasked\n";
  for (int c = 0; c < r.classes.num_classes; ++c) {
    const std::size_t i = static_cast<std::size_t>(c);
    out << c << ',' << Fmt(r.iou.per_class[i]) << ',' << Fmt(r.iou_extended.per_class[i])
        << ',' << Fmt(r.raw_iou.per_class[i]) << ',' << r.fused.flips_by_class(true)[i]
        << ',' << r.raw.flips_by_class(true)[i] << ',' << Fmt(rel_masked[i]) << ','
        << r.fused.flips_by_class(false)[i] << ',' << r.raw.flips_by_class(false)[i]
        << ',' << Fmt(rel_unmasked[i]) << '\n';
  }
  return out.str();
}

std::string FramesCsv(const PipelineReport& r) {
  std::ostringstream out;
  out << "frame,stcv_fused_masked,stcv_fused_unmasked,stcv_raw_masked,"
         "stcv_raw_unmasked,mean_uncertainty\n";
  for (std::size_t t = 0; t < r.fused.frames(); ++t) {
    out << t << ',' << Fmt(r.fused.stcv(true)[t]) << ',' << Fmt(r.fused.stcv(false)[t])
        << ',' << Fmt(r.raw.stcv(true)[t]) << ',' << Fmt(r.raw.stcv(false)[t]) << ',';
    if (t < r.mean_uncertainty.size()) out << Fmt(r.mean_uncertainty[t]);
    out << '\n';
  }
  return out.str();
}

std::string SummaryText(const PipelineReport& r) {
  json j;
  j["frames"] = r.frames;
  j["k"] = r.k;
  j["alpha"] = r.alpha;
  j["paradigm"] = ParadigmName(r.paradigm);
  j["delta"] = r.delta;
  j["miou"] = r.iou.mean;
  j["miou_extended"] = r.iou_extended.mean;
  j["raw_miou"] = r.raw_iou.mean;
  j["mstcv"] = r.fused.Mstcv(true);
  j["mstcv_unmasked"] = r.fused.Mstcv(false);
  j["raw_mstcv"] = r.raw.Mstcv(true);
  j["raw_mstcv_unmasked"] = r.raw.Mstcv(false);
  return j.dump(2) + "\n";
}

void WriteMemoryDump(const std::filesystem::path& dir, const SceneMemory& mem,
                     const PipelineReport& report) {
  std::filesystem::create_directories(dir);
  WriteOcg(dir / "features.ocg", mem.features());
  WriteOcg(dir / "attributes.ocg", mem.attributes());
  WriteOcg(dir / "pred_labels.ocg", mem.predictions());
  WriteOcg(dir / "gt_labels.ocg", mem.ground_truth());
  const GridSpec& s = mem.spec();
  json m;
  m["extent"] = {{"origin", {s.origin.x(), s.origin.y(), s.origin.z()}},
                 {"voxel_size", s.voxel_size},
                 {"dims", {s.dims.h, s.dims.w, s.dims.z}}};
  m["delta"] = mem.RelativeVolumeChange();
  m["frames"] = report.frames;
  m["alpha"] = report.alpha;
  m["k"] = report.k;
  m["layout"] = {{"feature_channels", mem.layout().feature_channels},
                 {"num_classes", mem.layout().num_classes},
                 {"free_class", mem.layout().free_class}};
  m["files"] = {"features.ocg", "attributes.ocg", "pred_labels.ocg", "gt_labels.ocg"};
  WriteFileBytes(dir / "manifest.json", [&] {
    const std::string text = m.dump(2) + "\n";
    return std::vector<std::uint8_t>(text.begin(), text.end());
  }());
}

void WriteEvalDump(const std::filesystem::path& dir, const PipelineFrames& frames) {
  for (const char* sub : {"pred", "gt", "vis", "dynamic"}) {
    std::filesystem::create_directories(dir / sub);
  }
  WritePoseFile(dir / "poses.txt", frames.poses);
  for (std::size_t t = 0; t < frames.poses.size(); ++t) {
    const std::string name = FrameName(static_cast<int>(t));
    WriteOcg(dir / "pred" / name, frames.predictions[t]);
    WriteOcg(dir / "gt" / name, frames.ground_truth[t]);
    WriteOcg(dir / "vis" / name, frames.visibility[t]);
    WriteOcg(dir / "dynamic" / name, frames.dynamic_mask[t]);
  }
}

EvalReport EvaluateDump(const std::filesystem::path& dir, const ClassSet& classes) {
  const std::vector<Pose> poses = ReadPoseFile(dir / "poses.txt");
  if (poses.empty()) throw InvalidArgumentError("pose file has no frames");
  auto count_frames = [&](const char* sub) {
    std::size_t count = 0;
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(dir / sub, ec)) {
      if (e.path().extension() == ".ocg") ++count;
    }
    if (ec) throw IoError("cannot list " + (dir / sub).string());
    return count;
  };
  for (const char* sub : {"pred", "gt", "vis"}) {
    const std::size_t count = count_frames(sub);
    if (count != poses.size()) {
      throw InvalidArgumentError(std::string(sub) + "/ holds " + std::to_string(count) +
                                 " frames but the pose file has " +
                                 std::to_string(poses.size()));
    }
  }
  const bool has_dynamic = std::filesystem::is_directory(dir / "dynamic");
  if (has_dynamic && count_frames("dynamic") != poses.size()) {
    throw InvalidArgumentError("dynamic/ frame count differs from the pose file");
  }

  EvalReport report;
  std::optional<SequenceEvaluator> evaluator;
  for (std::size_t t = 0; t < poses.size(); ++t) {
    const std::string name = FrameName(static_cast<int>(t));
    const LabelGrid pred = ReadOcgLabels(dir / "pred" / name);
    const LabelGrid gt = ReadOcgLabels(dir / "gt" / name);
    const LabelGrid vis = ReadOcgLabels(dir / "vis" / name);
    std::optional<LabelGrid> dynamic;
    if (has_dynamic) dynamic = ReadOcgLabels(dir / "dynamic" / name);
    if (!evaluator) evaluator.emplace(poses, pred.spec(), classes);
    try {
      evaluator->AddFrame(poses[t], pred, gt, vis, dynamic ? &*dynamic : nullptr);
    } catch (const InvalidArgumentError& e) {
      throw InvalidArgumentError("frame " + std::to_string(t) + ": " + e.what());
    }
  }
  report.frames = static_cast<int>(poses.size());
  report.ledger = evaluator->ledger();
  report.iou = evaluator->Iou(false);
  report.iou_extended = evaluator->Iou(true);
  return report;
}

std::string EvalCsv(const EvalReport& r, const ClassSet& classes) {
  std::ostringstream out;
  out << "class,iou,iou_extended,flips_masked,flips_unmasked\n";
  for (int c = 0; c < classes.num_classes; ++c) {
    const std::size_t i = static_cast<std::size_t>(c);
    out << c << ',' << Fmt(r.iou.per_class[i]) << ',' << Fmt(r.iou_extended.per_class[i])
        << ',' << r.ledger.flips_by_class(true)[i] << ','
        << r.ledger.flips_by_class(false)[i] << '\n';
  }
  return out.str();
}

std::string EvalSummaryText(const EvalReport& r) {
  json j;
  j["frames"] = r.frames;
  j["miou"] = r.iou.mean;
  j["miou_extended"] = r.iou_extended.mean;
  j["mstcv"] = r.ledger.Mstcv(true);
  j["mstcv_unmasked"] = r.ledger.Mstcv(false);
  return j.dump(2) + "\n";
}

}  // namespace stocc
