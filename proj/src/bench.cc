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
#include "stocc/bench.h"

#include <algorithm>
#include <cstdio>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "stocc/common.h"
#include "stocc/random.h"

namespace stocc {
namespace {

std::string Fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

const char* Color(Paradigm p) {
  switch (p) {
    case Paradigm::kRecurrent:
      return "#d62728";
    case Paradigm::kStacked:
      return "#1f77b4";
    case Paradigm::kUnified:
      return "#2ca02c";
  }
  return "#000000";
}

std::vector<ParadigmFrame> MakeFrames(const BenchConfig& config, int count) {
  std::vector<ParadigmFrame> frames;
  frames.reserve(count);
  Rng rng(config.seed);
  const double step = config.step_voxels * config.grid.voxel_size;
  for (int t = 0; t < count; ++t) {
    ParadigmFrame f{Pose::Translation(step * t, 0.0, 0.0, t), VoxelGrid(config.grid)};
    for (double& v : f.features.data()) v = rng.Normal();
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace

GridSpec BenchConfig::DefaultBenchGrid() {
  GridSpec g;
  g.dims = {50, 50, 4};
  g.voxel_size = 0.4;
  g.origin = Vec3(-10.0, -10.0, -1.0);
  g.channels = 16;
  return g;
}

std::vector<BenchRow> RunBenchmark(const BenchConfig& config) {
  if (config.k_list.empty()) throw InvalidArgumentError("k_list must not be empty");
  if (config.repeats < 1) throw InvalidArgumentError("repeats must be >= 1");
  if (config.measured_frames < 1) throw InvalidArgumentError("measured_frames must be >= 1");
  for (int k : config.k_list) {
    if (k < 1) throw InvalidArgumentError("every k must be >= 1");
  }
  config.grid.Validate();
  const int max_k = *std::max_element(config.k_list.begin(), config.k_list.end());
  const std::vector<ParadigmFrame> frames =
      MakeFrames(config, max_k - 1 + config.measured_frames);

#if defined(__GLIBC__)
  // Keep freed grids resident: otherwise heap trimming turns the stacked
  // window's short-lived buffers into page faults that swamp the timings.
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  ScopedWorkerLimit single_lane(1);
  std::vector<BenchRow> rows;
  for (Paradigm paradigm : config.paradigms) {
    for (int k : config.k_list) {
      // Queue storage only depends on the window, so queue runs stop after
      // the measured frames. The scene memory is sized from the whole
      // trajectory, which is shared by every k.
      const std::size_t count = paradigm == Paradigm::kUnified
                                    ? frames.size()
                                    : static_cast<std::size_t>(k - 1 + config.measured_frames);
      const std::span<const ParadigmFrame> run_frames(frames.data(), count);
      BenchRow row{paradigm, k, 0, 0.0};
      double total = 0.0;
      int samples = 0;
      for (int r = 0; r < config.repeats; ++r) {
        const ParadigmRun run = RunParadigm(paradigm, run_frames, AverageFuse,
                                            ParadigmOptions{k, false});
        row.peak_history_bytes = std::max(row.peak_history_bytes, run.trace.peak_history_bytes);
        for (std::size_t t = static_cast<std::size_t>(k - 1); t < run.trace.fuse_seconds.size();
             ++t) {
          total += run.trace.fuse_seconds[t];
          ++samples;
        }
      }
      row.mean_fuse_ms = 1e3 * total / samples;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string BenchCsv(std::span<const BenchRow> rows, bool include_timing) {
  std::ostringstream out;
  out << "paradigm,k,peak_history_bytes" << (include_timing ? ",mean_fuse_ms" : "") << '\n';
  for (const BenchRow& r : rows) {
    out << ParadigmName(r.paradigm) << ',' << r.k << ',' << r.peak_history_bytes;
    if (include_timing) out << ',' << Fixed(r.mean_fuse_ms, 4);
    out << '\n';
  }
  return out.str();
}

std::string BenchSvg(std::span<const BenchRow> rows) {
  constexpr double kPanelW = 340.0, kPanelH = 240.0, kLeft = 70.0, kTop = 40.0;
  double max_k = 1.0, max_bytes = 1.0, max_ms = 1e-6;
  for (const BenchRow& r : rows) {
    max_k = std::max(max_k, static_cast<double>(r.k));
    max_bytes = std::max(max_bytes, static_cast<double>(r.peak_history_bytes));
    max_ms = std::max(max_ms, r.mean_fuse_ms);
  }
  std::vector<Paradigm> order;
  for (const BenchRow& r : rows) {
    if (std::find(order.begin(), order.end(), r.paradigm) == order.end()) {
      order.push_back(r.paradigm);
    }
  }
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"860\" height=\"340\" "
         "font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"860\" height=\"340\" fill=\"white\"/>\n";
  auto panel = [&](double x0, const char* title, const char* unit, double max_y,
                   auto value) {
    svg << "<text x=\"" << Fixed(x0 + kPanelW / 2, 1) << "\" y=\"24\" text-anchor=\"middle\">"
        << title << "</text>\n";
    svg << "<rect x=\"" << Fixed(x0, 1) << "\" y=\"" << Fixed(kTop, 1) << "\" width=\""
        << Fixed(kPanelW, 1) << "\" height=\"" << Fixed(kPanelH, 1)
        << "\" fill=\"none\" stroke=\"#888\"/>\n";
    svg << "<text x=\"" << Fixed(x0 + kPanelW / 2, 1) << "\" y=\""
        << Fixed(kTop + kPanelH + 32, 1) << "\" text-anchor=\"middle\">k (frames)</text>\n";
    svg << "<text x=\"" << Fixed(x0 - 8, 1) << "\" y=\"" << Fixed(kTop + 4, 1)
        << "\" text-anchor=\"end\">" << Fixed(max_y, 2) << "</text>\n";
    svg << "<text x=\"" << Fixed(x0 - 8, 1) << "\" y=\"" << Fixed(kTop + kPanelH, 1)
        << "\" text-anchor=\"end\">0 " << unit << "</text>\n";
    for (Paradigm p : order) {
      svg << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << Color(p) << "\" points=\"";
      for (const BenchRow& r : rows) {
        if (r.paradigm != p) continue;
        const double x = x0 + kPanelW * r.k / max_k;
        const double y = kTop + kPanelH * (1.0 - value(r) / max_y);
        svg << Fixed(x, 2) << ',' << Fixed(y, 2) << ' ';
      }
      svg << "\"/>\n";
    }
  };
  panel(kLeft, "historical storage", "MB", max_bytes / 1e6,
        [](const BenchRow& r) { return r.peak_history_bytes / 1e6; });
  panel(kLeft + kPanelW + 90.0, "fusion time per frame", "ms", max_ms,
        [](const BenchRow& r) { return r.mean_fuse_ms; });
  double ly = kTop + 12;
  for (Paradigm p : order) {
    svg << "<text x=\"" << Fixed(kLeft + 10, 1) << "\" y=\"" << Fixed(ly, 1) << "\" fill=\""
        << Color(p) << "\">" << ParadigmName(p) << "</text>\n";
    ly += 16;
  }
  svg << "</svg>\n";
  return svg.str();
}

double LinearFitR2(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidArgumentError("linear fit needs two or more paired points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (syy == 0.0) return 1.0;
  if (sxx == 0.0) return 0.0;
  return sxy * sxy / (sxx * syy);
}

}  // namespace stocc
