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
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <json.hpp>

#include "stocc/common.h"
#include "stocc/random.h"

namespace stocc {
namespace {

using nlohmann::json;

constexpr double kDegToRad = std::numbers::pi / 180.0;
// Stream ids for MixSeed.
constexpr std::uint64_t kEmbeddingStream = 0xe3b0c442ull;

Vec3 ReadVec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw InvalidArgumentError(std::string(what) + ": expected [x, y, z]");
  }
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) {
      throw InvalidArgumentError(std::string(what) + ": non-numeric entry");
    }
    v[i] = j[i].get<double>();
  }
  return v;
}

json WriteVec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void CheckKeys(const json& j, std::initializer_list<const char*> allowed,
               const char* where) {
  if (!j.is_object()) {
    throw InvalidArgumentError(std::string(where) + ": expected an object");
  }
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok |= key == a;
    if (!ok) {
      throw InvalidArgumentError(std::string(where) + ": unknown key '" + key +
                                 "'");
    }
  }
}

template <typename T>
void Read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgumentError(std::string("scene key '") + key + "': " + e.what());
  }
}

BoxPrimitive ReadBox(const json& j, bool dynamic) {
  if (dynamic) {
    CheckKeys(j, {"min", "max", "label", "velocity"}, "dynamic box");
  } else {
    CheckKeys(j, {"min", "max", "label"}, "static box");
  }
  if (!j.contains("min") || !j.contains("max") || !j.contains("label")) {
    throw InvalidArgumentError("box needs min, max and label");
  }
  BoxPrimitive b;
  b.min = ReadVec3(j["min"], "box min");
  b.max = ReadVec3(j["max"], "box max");
  Read(j, "label", b.label);
  if (dynamic && j.contains("velocity")) b.velocity = ReadVec3(j["velocity"], "velocity");
  return b;
}

json WriteBox(const BoxPrimitive& b, bool dynamic) {
  json j = {{"min", WriteVec3(b.min)}, {"max", WriteVec3(b.max)}, {"label", b.label}};
  if (dynamic) j["velocity"] = WriteVec3(b.velocity);
  return j;
}

bool BoxInside(const Vec3& lo, const Vec3& hi, const SceneScript& s) {
  return (lo.array() >= s.world_min.array()).all() &&
         (hi.array() <= s.world_max.array()).all();
}

// Per-voxel rasterization result before noise.
struct Raster {
  LabelGrid labels;
  LabelGrid dynamic_mask;
  std::vector<std::uint8_t> obstacle_column;  // H * W
  VoxelGrid gt_flow;
};

Raster Rasterize(const SceneScript& s, const Pose& pose, double time) {
  GridSpec spec = s.grid;
  spec.channels = 2;
  Raster r{LabelGrid(spec, static_cast<std::uint8_t>(s.free_class)),
           LabelGrid(spec, 0),
           std::vector<std::uint8_t>(static_cast<std::size_t>(spec.dims.h) * spec.dims.w, 0),
           VoxelGrid(spec, 0.0)};
  const Eigen::Matrix3d rt = pose.rotation().transpose();
  for (int z = 0; z < spec.dims.z; ++z) {
    for (int y = 0; y < spec.dims.h; ++y) {
      for (int x = 0; x < spec.dims.w; ++x) {
        const Vec3 w = pose.Apply(spec.VoxelCenter(x, y, z));
        int label = -1;
        bool obstacle = false;
        for (const BoxPrimitive& b : s.dynamics) {
          if (!b.Contains(w, time)) continue;
          label = b.label;
          obstacle = true;
          r.dynamic_mask(x, y, z) = 1;
          const Vec3 f = rt * b.velocity * (s.frame_dt / spec.voxel_size);
          r.gt_flow(x, y, z, 0) = f.x();
          r.gt_flow(x, y, z, 1) = f.y();
          break;
        }
        if (label < 0) {
          for (const BoxPrimitive& b : s.statics) {
            if (!b.Contains(w, 0.0)) continue;
            label = b.label;
            obstacle = true;
            break;
          }
        }
        if (label < 0 && s.ground && w.z() <= s.ground->z_top) label = s.ground->label;
        if (label >= 0) r.labels(x, y, z) = static_cast<std::uint8_t>(label);
        if (obstacle) r.obstacle_column[static_cast<std::size_t>(y) * spec.dims.w + x] = 1;
      }
    }
  }
  return r;
}

// Range/bearing sector plus first-hit occlusion on top-down rays from the ego.
LabelGrid Visibility(const SceneScript& s, const Raster& r) {
  const GridSpec& spec = s.grid;
  const int w = spec.dims.w;
  const int h = spec.dims.h;
  const Vec3 ego = WorldToGrid(spec, Vec3::Zero());
  std::vector<std::uint8_t> column(static_cast<std::size_t>(h) * w, 0);
  const double half_fov = 0.5 * s.fov_deg * kDegToRad;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec3 c = spec.VoxelCenter(x, y, 0);
      if (std::hypot(c.x(), c.y()) > s.visibility_range) continue;
      if (s.fov_deg < 360.0 && std::abs(std::atan2(c.y(), c.x())) > half_fov) continue;
      const double dx = x - ego.x();
      const double dy = y - ego.y();
      const int steps = static_cast<int>(std::ceil(4.0 * std::hypot(dx, dy)));
      bool hit = false;
      for (int i = 1; i < steps && !hit; ++i) {
        const double f = static_cast<double>(i) / steps;
        const int cx = static_cast<int>(std::lround(ego.x() + f * dx));
        const int cy = static_cast<int>(std::lround(ego.y() + f * dy));
        if (cx == x && cy == y) break;
        if (cx < 0 || cy < 0 || cx >= w || cy >= h) continue;
        hit = r.obstacle_column[static_cast<std::size_t>(cy) * w + cx] != 0;
      }
      if (!hit) column[static_cast<std::size_t>(y) * w + x] = 1;
    }
  }
  LabelGrid vis(spec, 0);
  for (int z = 0; z < spec.dims.z; ++z) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) vis(x, y, z) = column[static_cast<std::size_t>(y) * w + x];
    }
  }
  return vis;
}

std::vector<double> ClassEmbeddings(const SceneScript& s, std::uint64_t seed) {
  Rng rng(MixSeed(seed, kEmbeddingStream));
  std::vector<double> e(static_cast<std::size_t>(s.num_classes) * s.feature_channels);
  for (double& v : e) v = rng.Normal();
  return e;
}

}  // namespace

bool BoxPrimitive::Contains(const Vec3& p, double time) const {
  const Vec3 shift = velocity * time;
  return (p.array() >= (min + shift).array()).all() &&
         (p.array() < (max + shift).array()).all();
}

GridSpec SceneScript::DefaultGrid(int h, int w, int z, double voxel_size) {
  GridSpec g;
  g.dims = {h, w, z};
  g.voxel_size = voxel_size;
  // Cell boundaries (not centers) on the meter lattice, so primitives with
  // round coordinates never split a voxel center.
  g.origin = Vec3((0.5 - 0.5 * w) * voxel_size, (0.5 - 0.5 * h) * voxel_size, -1.0);
  g.channels = 1;
  return g;
}

void SceneScript::Validate() const {
  grid.Validate();
  if (num_classes < 2 || num_classes > 255) {
    throw InvalidArgumentError("classes.num must be in [2, 255]");
  }
  if (free_class < 0 || free_class >= num_classes) {
    throw InvalidArgumentError("classes.free must be a valid class");
  }
  if (feature_channels < 1) throw InvalidArgumentError("features must be >= 1");
  if (frame_count < 1) throw InvalidArgumentError("frames must be >= 1");
  if (!(frame_dt > 0.0) || !std::isfinite(frame_dt)) {
    throw InvalidArgumentError("dt must be positive");
  }
  if (!(label_flip_p >= 0.0 && label_flip_p <= 1.0)) {
    throw InvalidArgumentError("noise.label_flip_p must be in [0, 1]");
  }
  if (!(feature_sigma >= 0.0) || !std::isfinite(feature_sigma)) {
    throw InvalidArgumentError("noise.feature_sigma must be >= 0");
  }
  if (!(visibility_range > 0.0) || !(fov_deg > 0.0)) {
    throw InvalidArgumentError("visibility range and fov must be positive");
  }
  if (!std::isfinite(trajectory.speed) || !std::isfinite(trajectory.heading_deg) ||
      !std::isfinite(trajectory.yaw_rate_deg) || !trajectory.start.allFinite()) {
    throw InvalidArgumentError("trajectory values must be finite");
  }
  if (!world_min.allFinite() || !world_max.allFinite() ||
      !(world_min.array() < world_max.array()).all()) {
    throw InvalidArgumentError("world bounds must be finite with min < max");
  }
  auto check_label = [&](int label) {
    if (label < 0 || label >= num_classes) {
      throw InvalidArgumentError("primitive label " + std::to_string(label) +
                                 " out of range");
    }
  };
  if (ground) check_label(ground->label);
  const double span = frame_dt * (frame_count - 1);
  for (const BoxPrimitive& b : statics) {
    check_label(b.label);
    if (!(b.min.array() < b.max.array()).all()) {
      throw InvalidArgumentError("box min must be below max");
    }
    if (!BoxInside(b.min, b.max, *this)) {
      throw InvalidArgumentError("static primitive outside world bounds");
    }
  }
  for (const BoxPrimitive& b : dynamics) {
    check_label(b.label);
    if (!b.velocity.allFinite()) throw InvalidArgumentError("velocity must be finite");
    if (!(b.min.array() < b.max.array()).all()) {
      throw InvalidArgumentError("box min must be below max");
    }
    const Vec3 end = b.velocity * span;
    if (!BoxInside(b.min, b.max, *this) || !BoxInside(b.min + end, b.max + end, *this)) {
      throw InvalidArgumentError("dynamic primitive leaves world bounds");
    }
  }
}

std::vector<Pose> SceneScript::Trajectory() const {
  std::vector<Pose> poses;
  poses.reserve(frame_count);
  const double heading = trajectory.heading_deg * kDegToRad;
  const double rate = trajectory.yaw_rate_deg * kDegToRad;
  for (int t = 0; t < frame_count; ++t) {
    const double time = t * frame_dt;
    const double dist = trajectory.speed * time;
    if (trajectory.kind == TrajectoryKind::kStraight || rate == 0.0) {
      const Vec3 p = trajectory.start +
                     dist * Vec3(std::cos(heading), std::sin(heading), 0.0);
      poses.push_back(Pose::RotZ(heading, p, t));
    } else {
      const double yaw = heading + rate * time;
      const double radius = trajectory.speed / rate;
      const Vec3 p = trajectory.start +
                     radius * Vec3(std::sin(yaw) - std::sin(heading),
                                   std::cos(heading) - std::cos(yaw), 0.0);
      poses.push_back(Pose::RotZ(yaw, p, t));
    }
  }
  return poses;
}

std::vector<int> SceneScript::DynamicClasses() const {
  std::vector<int> out;
  for (const BoxPrimitive& b : dynamics) out.push_back(b.label);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

SceneScript ParseSceneScript(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgumentError(std::string("scene script: ") + e.what());
  }
  CheckKeys(j,
            {"grid", "classes", "features", "frames", "dt", "seed", "trajectory",
             "noise", "visibility", "world", "ground", "static", "dynamic"},
            "scene script");
  SceneScript s;
  if (j.contains("grid")) {
    const json& g = j["grid"];
    CheckKeys(g, {"dims", "voxel_size", "origin"}, "grid");
    std::vector<int> dims = {s.grid.dims.h, s.grid.dims.w, s.grid.dims.z};
    Read(g, "dims", dims);
    if (dims.size() != 3) throw InvalidArgumentError("grid.dims: expected [H, W, Z]");
    double voxel = s.grid.voxel_size;
    Read(g, "voxel_size", voxel);
    s.grid = SceneScript::DefaultGrid(dims[0], dims[1], dims[2], voxel);
    if (g.contains("origin")) s.grid.origin = ReadVec3(g["origin"], "grid.origin");
  }
  if (j.contains("classes")) {
    CheckKeys(j["classes"], {"num", "free"}, "classes");
    Read(j["classes"], "num", s.num_classes);
    Read(j["classes"], "free", s.free_class);
  }
  Read(j, "features", s.feature_channels);
  Read(j, "frames", s.frame_count);
  Read(j, "dt", s.frame_dt);
  Read(j, "seed", s.seed);
  if (j.contains("trajectory")) {
    const json& t = j["trajectory"];
    CheckKeys(t, {"type", "start", "speed", "heading_deg", "yaw_rate_deg"}, "trajectory");
    std::string type = "straight";
    Read(t, "type", type);
    if (type == "straight") {
      s.trajectory.kind = TrajectoryKind::kStraight;
    } else if (type == "arc") {
      s.trajectory.kind = TrajectoryKind::kArc;
    } else {
      throw InvalidArgumentError("trajectory.type must be straight or arc");
    }
    if (t.contains("start")) s.trajectory.start = ReadVec3(t["start"], "trajectory.start");
    Read(t, "speed", s.trajectory.speed);
    Read(t, "heading_deg", s.trajectory.heading_deg);
    Read(t, "yaw_rate_deg", s.trajectory.yaw_rate_deg);
  }
  if (j.contains("noise")) {
    CheckKeys(j["noise"], {"label_flip_p", "feature_sigma"}, "noise");
    Read(j["noise"], "label_flip_p", s.label_flip_p);
    Read(j["noise"], "feature_sigma", s.feature_sigma);
  }
  if (j.contains("visibility")) {
    CheckKeys(j["visibility"], {"range", "fov_deg"}, "visibility");
    Read(j["visibility"], "range", s.visibility_range);
    Read(j["visibility"], "fov_deg", s.fov_deg);
  }
  if (j.contains("world")) {
    CheckKeys(j["world"], {"min", "max"}, "world");
    if (j["world"].contains("min")) s.world_min = ReadVec3(j["world"]["min"], "world.min");
    if (j["world"].contains("max")) s.world_max = ReadVec3(j["world"]["max"], "world.max");
  }
  if (j.contains("ground")) {
    if (j["ground"].is_null()) {
      s.ground.reset();
    } else {
      CheckKeys(j["ground"], {"z_top", "label"}, "ground");
      GroundSlab g;
      Read(j["ground"], "z_top", g.z_top);
      Read(j["ground"], "label", g.label);
      s.ground = g;
    }
  }
  for (const char* key : {"static", "dynamic"}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_array()) {
      throw InvalidArgumentError(std::string(key) + ": expected a list of boxes");
    }
    const bool dynamic = std::string(key) == "dynamic";
    for (const json& b : j[key]) {
      (dynamic ? s.dynamics : s.statics).push_back(ReadBox(b, dynamic));
    }
  }
  s.Validate();
  return s;
}

SceneScript LoadSceneScript(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene script " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseSceneScript(ss.str());
}

std::string SceneScriptToText(const SceneScript& s) {
  json j;
  j["grid"] = {{"dims", {s.grid.dims.h, s.grid.dims.w, s.grid.dims.z}},
               {"voxel_size", s.grid.voxel_size},
               {"origin", WriteVec3(s.grid.origin)}};
  j["classes"] = {{"num", s.num_classes}, {"free", s.free_class}};
  j["features"] = s.feature_channels;
  j["frames"] = s.frame_count;
  j["dt"] = s.frame_dt;
  j["seed"] = s.seed;
  j["trajectory"] = {
      {"type", s.trajectory.kind == TrajectoryKind::kStraight ? "straight" : "arc"},
      {"start", WriteVec3(s.trajectory.start)},
      {"speed", s.trajectory.speed},
      {"heading_deg", s.trajectory.heading_deg},
      {"yaw_rate_deg", s.trajectory.yaw_rate_deg}};
  j["noise"] = {{"label_flip_p", s.label_flip_p}, {"feature_sigma", s.feature_sigma}};
  j["visibility"] = {{"range", s.visibility_range}, {"fov_deg", s.fov_deg}};
  j["world"] = {{"min", WriteVec3(s.world_min)}, {"max", WriteVec3(s.world_max)}};
  j["ground"] = s.ground ? json{{"z_top", s.ground->z_top}, {"label", s.ground->label}}
                         : json(nullptr);
  j["static"] = json::array();
  for (const BoxPrimitive& b : s.statics) j["static"].push_back(WriteBox(b, false));
  j["dynamic"] = json::array();
  for (const BoxPrimitive& b : s.dynamics) j["dynamic"].push_back(WriteBox(b, true));
  return j.dump(2) + "\n";
}

SceneScript DefaultStaticScene(double label_flip_p, std::uint64_t seed) {
  SceneScript s;
  s.label_flip_p = label_flip_p;
  s.feature_sigma = 0.1;
  s.seed = seed;
  s.visibility_range = 30.0;
  s.world_min = Vec3(-40.0, -40.0, -5.0);
  s.world_max = Vec3(60.0, 40.0, 10.0);
  s.ground = GroundSlab{-0.8, 11};
  auto box = [](double x0, double y0, double x1, double y1, double z1, int label) {
    return BoxPrimitive{Vec3(x0, y0, -0.8), Vec3(x1, y1, z1), label, Vec3::Zero()};
  };
  // Building rows, a sidewalk strip, parked cars, vegetation and poles.
  s.statics = {
      box(-14.0, 7.2, 2.0, 9.6, 1.6, 15),   box(4.0, 7.2, 30.0, 9.6, 1.6, 15),
      box(-14.0, -9.6, 12.0, -7.6, 1.6, 15), box(14.0, -9.6, 30.0, -7.6, 1.6, 15),
      box(-14.0, 5.6, 30.0, 7.2, -0.4, 13),  box(-6.0, 4.0, -2.0, 5.6, 0.8, 4),
      box(6.0, 4.0, 10.0, 5.6, 0.8, 4),      box(17.0, 4.0, 21.4, 5.6, 1.2, 10),
      box(-10.0, -6.8, -7.6, -5.2, 1.2, 16), box(2.0, -6.8, 4.4, -5.2, 1.2, 16),
      box(20.0, -6.8, 22.4, -5.2, 1.2, 16),  box(0.0, 3.2, 0.4, 3.6, 1.6, 0),
      box(12.0, 3.2, 12.4, 3.6, 1.6, 0),     box(8.0, -4.4, 8.4, -4.0, -0.4, 8),
  };
  return s;
}

SceneScript DefaultDynamicScene(double label_flip_p, std::uint64_t seed) {
  SceneScript s = DefaultStaticScene(label_flip_p, seed);
  s.dynamics = {
      {Vec3(-8.0, -3.2, -0.8), Vec3(-4.0, -1.6, 0.8), 4, Vec3(2.0, 0.0, 0.0)},
      {Vec3(24.0, 1.2, -0.8), Vec3(30.0, 3.2, 1.2), 3, Vec3(-1.0, 0.0, 0.0)},
      {Vec3(10.0, -5.2, -0.8), Vec3(10.4, -4.8, 0.8), 7, Vec3(0.3, 0.2, 0.0)},
  };
  return s;
}

FrameBundle GenerateFrame(const SceneScript& s, std::uint64_t seed, int t) {
  if (t < 0 || t >= s.frame_count) {
    throw IndexError("frame " + std::to_string(t) + " outside the script");
  }
  const Pose pose = s.Trajectory()[t];
  const double time = t * s.frame_dt;
  Raster r = Rasterize(s, pose, time);

  FrameBundle f;
  f.t = t;
  f.pose = pose;
  GridSpec spec = s.grid;
  const int n = s.num_classes;
  spec.channels = s.feature_channels;
  f.features = VoxelGrid(spec, 0.0);
  spec.channels = n;
  f.activation = VoxelGrid(spec, 0.0);
  f.log_variance = VoxelGrid(spec, 0.0);
  f.visibility = Visibility(s, r);
  f.ground_truth = std::move(r.labels);
  f.dynamic_mask = std::move(r.dynamic_mask);
  f.gt_flow = std::move(r.gt_flow);
  f.flow = f.gt_flow;
  f.prediction = f.ground_truth;

  const std::vector<double> embed = ClassEmbeddings(s, seed);
  const double p = s.label_flip_p;
  const double base_s = std::log(1e-3 + p);
  Rng rng(MixSeed(seed, static_cast<std::uint64_t>(t)));
  std::vector<double> u(n);
  for (std::int64_t cell = 0; cell < f.ground_truth.Cells(); ++cell) {
    const int g = f.ground_truth[cell];
    auto feat = f.features.At(cell);
    for (int c = 0; c < s.feature_channels; ++c) {
      feat[c] = embed[static_cast<std::size_t>(g) * s.feature_channels + c] +
                s.feature_sigma * rng.Normal();
    }
    auto act = f.activation.At(cell);
    double total = 0.0;
    for (int c = 0; c < n; ++c) {
      act[c] = (c == g ? 1.0 - p : 0.0) + p * rng.Uniform();
      total += act[c];
    }
    for (int c = 0; c < n; ++c) act[c] /= total;
    const bool visible = f.visibility[cell] != 0;
    auto lv = f.log_variance.At(cell);
    for (int c = 0; c < n; ++c) {
      lv[c] = base_s + 0.1 * rng.Uniform() + (visible ? 0.0 : 1.0);
    }
    if (visible && rng.Bernoulli(p)) {
      int other = static_cast<int>(rng.Below(static_cast<std::uint64_t>(n - 1)));
      if (other >= g) ++other;
      f.prediction[cell] = static_cast<std::uint8_t>(other);
    }
  }
  return f;
}

std::vector<FrameBundle> GenerateScene(const SceneScript& script, std::uint64_t seed) {
  script.Validate();
  std::vector<FrameBundle> frames;
  frames.reserve(script.frame_count);
  for (int t = 0; t < script.frame_count; ++t) {
    frames.push_back(GenerateFrame(script, seed, t));
  }
  return frames;
}

}  // namespace stocc
