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
#include "stocc/attention.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "stocc/common.h"
#include "stocc/random.h"

namespace stocc {
namespace {

constexpr double kNormEps = 1e-5;
constexpr double kGateClamp = 1e-12;

double Float32(double v) { return static_cast<double>(static_cast<float>(v)); }

MatrixXd UniformMatrix(Rng& rng, int rows, int cols, double range) {
  MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = Float32(rng.Uniform(-range, range));
  }
  return m;
}

VectorXd UniformVector(Rng& rng, int n, double range) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = Float32(rng.Uniform(-range, range));
  return v;
}

MatrixXd IdentityPlusNoise(Rng& rng, int n, double range) {
  MatrixXd m = UniformMatrix(rng, n, n, range);
  for (int i = 0; i < n; ++i) m(i, i) = Float32(1.0 + m(i, i));
  return m;
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void RequireShape(const MatrixXd& m, Eigen::Index rows, Eigen::Index cols,
                  const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw InvalidArgumentError(std::string(what) + " has shape " +
                               std::to_string(m.rows()) + "x" +
                               std::to_string(m.cols()) + ", expected " +
                               std::to_string(rows) + "x" +
                               std::to_string(cols));
  }
  if (!m.allFinite()) {
    throw InvalidArgumentError(std::string(what) + " has non-finite entries");
  }
}

VectorXd ToVector(std::span<const double> s) {
  return Eigen::Map<const VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

// Blob helpers.
class BlobWriter {
 public:
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back((v >> (8 * i)) & 0xff);
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back((v >> (8 * i)) & 0xff);
  }
  void Matrix(const MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        U32(std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
      }
    }
  }
  std::vector<std::uint8_t> Take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class BlobReader {
 public:
  explicit BlobReader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t U64() {
    const std::uint64_t lo = U32();
    const std::uint64_t hi = U32();
    return lo | (hi << 32);
  }
  void Matrix(MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        m(r, c) = static_cast<double>(std::bit_cast<float>(U32()));
      }
    }
  }
  void Vector(VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      v[i] = static_cast<double>(std::bit_cast<float>(U32()));
    }
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void Need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw IoError("parameter blob truncated");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

AttentionLayer ShapedLayer(int c, int points, int ffn_ratio) {
  AttentionLayer l;
  l.offset_weights = MatrixXd::Zero(points * 3, c);
  l.score_weights = MatrixXd::Zero(points, c);
  l.value_projection = MatrixXd::Identity(c, c);
  l.output_projection = MatrixXd::Identity(c, c);
  l.norm1_scale = VectorXd::Ones(c);
  l.norm1_shift = VectorXd::Zero(c);
  l.ffn_in = MatrixXd::Zero(ffn_ratio * c, c);
  l.ffn_in_bias = VectorXd::Zero(ffn_ratio * c);
  l.ffn_out = MatrixXd::Zero(c, ffn_ratio * c);
  l.ffn_out_bias = VectorXd::Zero(c);
  l.norm2_scale = VectorXd::Ones(c);
  l.norm2_shift = VectorXd::Zero(c);
  return l;
}

}  // namespace

AttentionParams AttentionParams::Init(const AttentionConfig& config) {
  if (config.channels < 1 || config.num_layers < 1 || config.num_points < 1 ||
      config.ffn_ratio < 1) {
    throw InvalidArgumentError("attention config sizes must be >= 1");
  }
  Rng rng(config.seed);
  const int c = config.channels;
  const double r = config.init_range;
  AttentionParams p;
  p.config = config;
  p.position_embedding =
      UniformMatrix(rng, static_cast<int>(config.dims.Cells()), c, r);
  for (int i = 0; i < config.num_layers; ++i) {
    AttentionLayer l = ShapedLayer(c, config.num_points, config.ffn_ratio);
    l.offset_weights = UniformMatrix(rng, config.num_points * 3, c, r);
    l.score_weights = UniformMatrix(rng, config.num_points, c, r);
    l.value_projection = IdentityPlusNoise(rng, c, r);
    l.output_projection = IdentityPlusNoise(rng, c, r);
    l.ffn_in = UniformMatrix(rng, config.ffn_ratio * c, c, r);
    l.ffn_out = UniformMatrix(rng, c, config.ffn_ratio * c, r);
    p.layers.push_back(std::move(l));
  }
  return p;
}

void AttentionParams::Validate() const {
  const int c = config.channels;
  const int k = config.num_points;
  const int h = config.ffn_ratio * c;
  RequireShape(position_embedding, config.dims.Cells(), c, "position_embedding");
  if (static_cast<int>(layers.size()) != config.num_layers) {
    throw InvalidArgumentError("attention layer count mismatch");
  }
  for (const AttentionLayer& l : layers) {
    RequireShape(l.offset_weights, k * 3, c, "offset_weights");
    RequireShape(l.score_weights, k, c, "score_weights");
    RequireShape(l.value_projection, c, c, "value_projection");
    RequireShape(l.output_projection, c, c, "output_projection");
    RequireShape(l.norm1_scale, c, 1, "norm1_scale");
    RequireShape(l.norm1_shift, c, 1, "norm1_shift");
    RequireShape(l.ffn_in, h, c, "ffn_in");
    RequireShape(l.ffn_in_bias, h, 1, "ffn_in_bias");
    RequireShape(l.ffn_out, c, h, "ffn_out");
    RequireShape(l.ffn_out_bias, c, 1, "ffn_out_bias");
    RequireShape(l.norm2_scale, c, 1, "norm2_scale");
    RequireShape(l.norm2_shift, c, 1, "norm2_shift");
  }
}

UncertaintyMlpParams UncertaintyMlpParams::Zero(int num_classes) {
  if (num_classes < 1) throw InvalidArgumentError("num_classes must be >= 1");
  UncertaintyMlpParams p;
  p.num_classes = num_classes;
  int fan_in = p.input_dim();
  for (int out : {kHidden[0], kHidden[1], kHidden[2], 1}) {
    p.weights.push_back(MatrixXd::Zero(out, fan_in));
    p.biases.push_back(VectorXd::Zero(out));
    fan_in = out;
  }
  return p;
}

UncertaintyMlpParams UncertaintyMlpParams::Init(int num_classes,
                                                std::uint64_t seed) {
  UncertaintyMlpParams p = Zero(num_classes);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    const int rows = static_cast<int>(p.weights[i].rows());
    const int cols = static_cast<int>(p.weights[i].cols());
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    p.weights[i] = UniformMatrix(rng, rows, cols, bound);
    p.biases[i] = UniformVector(rng, rows, bound);
  }
  return p;
}

void UncertaintyMlpParams::Validate() const {
  if (weights.size() != 4 || biases.size() != 4) {
    throw InvalidArgumentError("uncertainty MLP must have 4 layers");
  }
  int fan_in = input_dim();
  const int outs[4] = {kHidden[0], kHidden[1], kHidden[2], 1};
  for (int i = 0; i < 4; ++i) {
    RequireShape(weights[i], outs[i], fan_in, "mlp weight");
    RequireShape(biases[i], outs[i], 1, "mlp bias");
    fan_in = outs[i];
  }
}

double CosineSimilarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgumentError("cosine similarity of vectors of unequal size");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

double EstimateUncertainty(const UncertaintyMlpParams& params,
                           std::span<const double> class_activation,
                           double log_variance_mean, double similarity) {
  if (static_cast<int>(class_activation.size()) != params.num_classes) {
    throw InvalidArgumentError("uncertainty MLP expects " +
                               std::to_string(params.num_classes) +
                               " activations, got " +
                               std::to_string(class_activation.size()));
  }
  VectorXd x(params.input_dim());
  for (int i = 0; i < params.num_classes; ++i) x[i] = class_activation[i];
  x[params.num_classes] = log_variance_mean;
  x[params.num_classes + 1] = similarity;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    x = params.weights[i] * x + params.biases[i];
    if (i + 1 < params.weights.size()) x = x.cwiseMax(0.0);
  }
  return std::clamp(Sigmoid(x[0]), kGateClamp, 1.0 - kGateClamp);
}

VectorXd DeformableAttend(const AttentionLayer& layer, int num_points,
                          const VectorXd& query, const Vec3& ref_point,
                          const VoxelGrid& values, AttentionTrace* trace) {
  const int c = values.channels();
  const VectorXd offsets = layer.offset_weights * query;
  const VectorXd logits = layer.score_weights * query;
  std::vector<double> scores(num_points);
  Softmax(std::span<const double>(logits.data(), num_points), scores);

  VectorXd aggregate = VectorXd::Zero(c);
  std::vector<double> sample(c);
  if (trace) {
    trace->scores = scores;
    trace->sample_points.clear();
  }
  for (int k = 0; k < num_points; ++k) {
    const Vec3 point = ref_point + Vec3(offsets[3 * k], offsets[3 * k + 1],
                                        offsets[3 * k + 2]);
    if (trace) trace->sample_points.push_back(point);
    SampleTrilinear(values, point, sample);
    for (int ch = 0; ch < c; ++ch) aggregate[ch] += scores[k] * sample[ch];
  }
  if (trace) trace->aggregate = aggregate;
  return layer.output_projection * (layer.value_projection * aggregate);
}

VectorXd LayerNorm(const VectorXd& x, const VectorXd& scale,
                   const VectorXd& shift) {
  const double mean = x.mean();
  const VectorXd centered = x.array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(x.size());
  return (centered / std::sqrt(var + kNormEps)).cwiseProduct(scale) + shift;
}

VectorXd FeedForward(const AttentionLayer& layer, const VectorXd& x) {
  const VectorXd hidden = (layer.ffn_in * x + layer.ffn_in_bias).cwiseMax(0.0);
  return layer.ffn_out * hidden + layer.ffn_out_bias;
}

MemoryAttentionResult MemoryAttention(const AttentionParams& params,
                                      const UncertaintyMlpParams& u_params,
                                      const VoxelGrid& current,
                                      const VoxelGrid& history,
                                      const MemoryAttentionOptions& options) {
  const AttentionConfig& cfg = params.config;
  const GridSpec& spec = current.spec();
  const int c = cfg.channels;
  const int n = u_params.num_classes;
  if (current.channels() != c) {
    throw InvalidArgumentError("current features have " +
                               std::to_string(current.channels()) +
                               " channels, attention expects " +
                               std::to_string(c));
  }
  if (spec.dims != cfg.dims) {
    throw InvalidArgumentError("current grid dims differ from attention dims");
  }
  if (history.spec().dims != spec.dims || history.channels() != c + n + 3) {
    throw InvalidArgumentError(
        "history grid must hold features plus N + 3 attribute channels");
  }
  if (options.pinned_uncertainty &&
      !(*options.pinned_uncertainty >= 0.0 && *options.pinned_uncertainty <= 1.0)) {
    throw InvalidArgumentError("pinned uncertainty must be in [0, 1]");
  }

  // Split the history into the memory-side value grid and per-voxel
  // attributes. Both are shared by every layer.
  GridSpec feat_spec = spec;
  feat_spec.channels = c;
  VoxelGrid memory_values(feat_spec);
  GridSpec one = spec;
  one.channels = 1;
  MemoryAttentionResult result{VoxelGrid(feat_spec), VoxelGrid(one)};
  const std::int64_t cells = spec.Cells();
  std::vector<Vec3> refs(static_cast<std::size_t>(cells));

  ParallelFor(0, cells, [&](std::int64_t cell) {
    const auto h = history.At(cell);
    auto dst = memory_values.At(cell);
    std::copy(h.begin(), h.begin() + c, dst.begin());
    const auto attrs = h.subspan(c);
    double u;
    if (options.pinned_uncertainty) {
      u = *options.pinned_uncertainty;
    } else {
      const double eps = CosineSimilarity(current.At(cell), h.first(c));
      u = EstimateUncertainty(u_params, attrs.first(n), attrs[n], eps);
    }
    result.uncertainty.At(cell)[0] = u;
    const std::int64_t xy = cell % (static_cast<std::int64_t>(spec.dims.w) * spec.dims.h);
    const int z = static_cast<int>(cell / (static_cast<std::int64_t>(spec.dims.w) * spec.dims.h));
    const int y = static_cast<int>(xy / spec.dims.w);
    const int x = static_cast<int>(xy % spec.dims.w);
    Vec3 ref(x, y, z);
    if (options.use_flow) {
      ref.x() += attrs[n + 1];
      ref.y() += attrs[n + 2];
    }
    refs[static_cast<std::size_t>(cell)] = ref;
  });

  VoxelGrid state = current;
  VoxelGrid next(feat_spec);
  for (const AttentionLayer& layer : params.layers) {
    ParallelFor(0, cells, [&](std::int64_t cell) {
      const VectorXd x = ToVector(state.At(cell));
      const VectorXd query = x + params.position_embedding.row(cell).transpose();
      const Vec3& ref = refs[static_cast<std::size_t>(cell)];
      const double u = result.uncertainty.At(cell)[0];
      const VectorXd from_current =
          DeformableAttend(layer, cfg.num_points, query, ref, current);
      const VectorXd from_memory =
          DeformableAttend(layer, cfg.num_points, query, ref, memory_values);
      const VectorXd attended = (1.0 - u) * from_current + u * from_memory;
      const VectorXd y = LayerNorm(x + attended, layer.norm1_scale, layer.norm1_shift);
      const VectorXd out =
          LayerNorm(y + FeedForward(layer, y), layer.norm2_scale, layer.norm2_shift);
      auto dst = next.At(cell);
      for (int ch = 0; ch < c; ++ch) dst[ch] = out[ch];
    });
    std::swap(state, next);
  }
  result.fused = std::move(state);
  return result;
}

MemoryAttentionResult MemoryAttentionStep(const AttentionParams& params,
                                          const UncertaintyMlpParams& u_params,
                                          const VoxelGrid& current,
                                          const SceneMemory& mem,
                                          const Pose& pose,
                                          const MemoryAttentionOptions& options) {
  if (!mem.allocated()) {
    throw InvalidArgumentError("memory attention on an unallocated memory");
  }
  if (mem.layout().feature_channels != params.config.channels ||
      mem.layout().num_classes != u_params.num_classes) {
    throw InvalidArgumentError("memory layout does not match attention params");
  }
  const VoxelGrid history =
      ExtractRoi(mem, pose, current.spec(), PlaneSet{PlaneSet::kAll});
  return MemoryAttention(params, u_params, current, history, options);
}

std::vector<std::uint8_t> EncodeParams(const AttentionParams& attention,
                                       const UncertaintyMlpParams& mlp) {
  attention.Validate();
  mlp.Validate();
  const AttentionConfig& cfg = attention.config;
  std::vector<std::uint8_t> bytes = {'S', 'T', 'P', '1'};
  BlobWriter body;
  body.U32(static_cast<std::uint32_t>(cfg.num_layers));
  body.U32(static_cast<std::uint32_t>(cfg.num_points));
  body.U32(static_cast<std::uint32_t>(cfg.channels));
  body.U32(static_cast<std::uint32_t>(cfg.dims.h));
  body.U32(static_cast<std::uint32_t>(cfg.dims.w));
  body.U32(static_cast<std::uint32_t>(cfg.dims.z));
  body.U32(static_cast<std::uint32_t>(cfg.ffn_ratio));
  body.U32(static_cast<std::uint32_t>(mlp.num_classes));
  body.U64(cfg.seed);
  body.Matrix(attention.position_embedding);
  for (const AttentionLayer& l : attention.layers) {
    body.Matrix(l.offset_weights);
    body.Matrix(l.score_weights);
    body.Matrix(l.value_projection);
    body.Matrix(l.output_projection);
    body.Matrix(l.norm1_scale);
    body.Matrix(l.norm1_shift);
    body.Matrix(l.ffn_in);
    body.Matrix(l.ffn_in_bias);
    body.Matrix(l.ffn_out);
    body.Matrix(l.ffn_out_bias);
    body.Matrix(l.norm2_scale);
    body.Matrix(l.norm2_shift);
  }
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    body.Matrix(mlp.weights[i]);
    body.Matrix(mlp.biases[i]);
  }
  const auto tail = body.Take();
  bytes.insert(bytes.end(), tail.begin(), tail.end());
  return bytes;
}

std::pair<AttentionParams, UncertaintyMlpParams> DecodeParams(
    std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "STP1", 4) != 0) {
    throw IoError("not a parameter blob (bad magic)");
  }
  BlobReader r(bytes.subspan(4));
  AttentionConfig cfg;
  cfg.num_layers = static_cast<int>(r.U32());
  cfg.num_points = static_cast<int>(r.U32());
  cfg.channels = static_cast<int>(r.U32());
  cfg.dims.h = static_cast<int>(r.U32());
  cfg.dims.w = static_cast<int>(r.U32());
  cfg.dims.z = static_cast<int>(r.U32());
  cfg.ffn_ratio = static_cast<int>(r.U32());
  const int num_classes = static_cast<int>(r.U32());
  cfg.seed = r.U64();
  constexpr int kLimit = 1 << 16;
  if (cfg.num_layers < 1 || cfg.num_points < 1 || cfg.channels < 1 ||
      cfg.dims.h < 1 || cfg.dims.w < 1 || cfg.dims.z < 1 || cfg.ffn_ratio < 1 ||
      num_classes < 1 || cfg.num_layers > kLimit || cfg.channels > kLimit ||
      cfg.num_points > kLimit || cfg.dims.h > kLimit || cfg.dims.w > kLimit ||
      cfg.dims.z > kLimit || cfg.ffn_ratio > 64 || num_classes > 255) {
    throw IoError("parameter blob header is out of range");
  }
  AttentionParams attention;
  attention.config = cfg;
  attention.position_embedding = MatrixXd::Zero(cfg.dims.Cells(), cfg.channels);
  r.Matrix(attention.position_embedding);
  for (int i = 0; i < cfg.num_layers; ++i) {
    AttentionLayer l = ShapedLayer(cfg.channels, cfg.num_points, cfg.ffn_ratio);
    r.Matrix(l.offset_weights);
    r.Matrix(l.score_weights);
    r.Matrix(l.value_projection);
    r.Matrix(l.output_projection);
    r.Vector(l.norm1_scale);
    r.Vector(l.norm1_shift);
    r.Matrix(l.ffn_in);
    r.Vector(l.ffn_in_bias);
    r.Matrix(l.ffn_out);
    r.Vector(l.ffn_out_bias);
    r.Vector(l.norm2_scale);
    r.Vector(l.norm2_shift);
    attention.layers.push_back(std::move(l));
  }
  UncertaintyMlpParams mlp = UncertaintyMlpParams::Zero(num_classes);
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    r.Matrix(mlp.weights[i]);
    r.Vector(mlp.biases[i]);
  }
  if (!r.done()) throw IoError("parameter blob has trailing bytes");
  attention.Validate();
  mlp.Validate();
  return {std::move(attention), std::move(mlp)};
}

}  // namespace stocc
