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
#ifndef STOCC_ATTENTION_H_
#define STOCC_ATTENTION_H_

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stocc/geometry.h"
#include "stocc/memory.h"

namespace stocc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct AttentionConfig {
  int channels = 80;
  GridDims dims;  // frame grid, sizes the position embedding table
  int num_layers = 3;
  int num_points = 4;
  int ffn_ratio = 2;
  std::uint64_t seed = 0;
  double init_range = 0.02;
};

// One temporal self-attention layer: deformable attention, norm,
// feed-forward, norm.
struct AttentionLayer {
  MatrixXd offset_weights;     // (num_points * 3) x C, voxel units
  MatrixXd score_weights;      // num_points x C
  MatrixXd value_projection;   // C x C
  MatrixXd output_projection;  // C x C
  VectorXd norm1_scale;
  VectorXd norm1_shift;
  MatrixXd ffn_in;  // (ffn_ratio * C) x C
  VectorXd ffn_in_bias;
  MatrixXd ffn_out;  // C x (ffn_ratio * C)
  VectorXd ffn_out_bias;
  VectorXd norm2_scale;
  VectorXd norm2_shift;
};

struct AttentionParams {
  AttentionConfig config;
  MatrixXd position_embedding;  // cells x C, indexed like the frame grid
  std::vector<AttentionLayer> layers;

  // Offsets, scores, the position table and feed-forward weights are drawn
  // uniformly from +-init_range; projections are identity plus that noise;
  // norms start at scale 1, shift 0. Every value is representable as a
  // 32-bit float so parameter blobs round-trip exactly.
  static AttentionParams Init(const AttentionConfig& config);

  void Validate() const;
};

// 4-layer MLP over (c, delta, epsilon) with hidden sizes 64, 32, 16 and a
// sigmoid output unit.
struct UncertaintyMlpParams {
  static constexpr int kHidden[3] = {64, 32, 16};

  int num_classes = 18;
  std::vector<MatrixXd> weights;  // 64x(N+2), 32x64, 16x32, 1x16
  std::vector<VectorXd> biases;

  static UncertaintyMlpParams Init(int num_classes, std::uint64_t seed);
  static UncertaintyMlpParams Zero(int num_classes);

  int input_dim() const { return num_classes + 2; }
  void Validate() const;
};

// dot(a, b) / (|a| |b|), or 0 when either norm is below 1e-12.
double CosineSimilarity(std::span<const double> a, std::span<const double> b);

// Output lies in (0, 1); values are clamped 1e-12 away from both ends.
// Throws InvalidArgumentError when c has the wrong length.
double EstimateUncertainty(const UncertaintyMlpParams& params,
                           std::span<const double> class_activation,
                           double log_variance_mean, double similarity);

// Optional introspection of one DeformableAttend call.
struct AttentionTrace {
  std::vector<double> scores;
  std::vector<Vec3> sample_points;
  VectorXd aggregate;  // sum_k score_k * sample_k, before projections
};

// offsets = offset_weights * query, scores = softmax(score_weights * query),
// out = output_projection * value_projection * sum_k scores_k *
// trilinear(values, ref + offset_k).
VectorXd DeformableAttend(const AttentionLayer& layer, int num_points,
                          const VectorXd& query, const Vec3& ref_point,
                          const VoxelGrid& values,
                          AttentionTrace* trace = nullptr);

// Channel standardization with learnable scale and shift (eps 1e-5).
VectorXd LayerNorm(const VectorXd& x, const VectorXd& scale,
                   const VectorXd& shift);
// ffn_out * relu(ffn_in * x + b_in) + b_out.
VectorXd FeedForward(const AttentionLayer& layer, const VectorXd& x);

struct MemoryAttentionOptions {
  // Replaces the MLP output everywhere when set.
  std::optional<double> pinned_uncertainty;
  // Shift reference points by the stored top-down flow.
  bool use_flow = true;
};

struct MemoryAttentionResult {
  VoxelGrid fused;        // C channels
  VoxelGrid uncertainty;  // 1 channel
};

// Runs the layer stack given already extracted history. `history` holds the
// memory features (C channels) followed by the attribute planes
// (N activations, delta, 2 flow), i.e. ExtractRoi(..., PlaneSet::kAll).
MemoryAttentionResult MemoryAttention(const AttentionParams& params,
                                      const UncertaintyMlpParams& u_params,
                                      const VoxelGrid& current,
                                      const VoxelGrid& history,
                                      const MemoryAttentionOptions& options);

// Extracts the RoI at `pose` once and runs MemoryAttention. Throws
// InvalidArgumentError when the memory is not allocated or shapes disagree.
MemoryAttentionResult MemoryAttentionStep(const AttentionParams& params,
                                          const UncertaintyMlpParams& u_params,
                                          const VoxelGrid& current,
                                          const SceneMemory& mem,
                                          const Pose& pose,
                                          const MemoryAttentionOptions& options = {});

// Single binary blob: 'S' 'T' 'P' '1', u32 layers, points, channels, H, W, Z,
// ffn_ratio, num_classes, u64 seed, then every matrix/vector in declaration
// order (position table, per-layer blocks, MLP weights and biases), row-major
// 32-bit float, all little-endian.
std::vector<std::uint8_t> EncodeParams(const AttentionParams& attention,
                                       const UncertaintyMlpParams& mlp);
std::pair<AttentionParams, UncertaintyMlpParams> DecodeParams(
    std::span<const std::uint8_t> bytes);

}  // namespace stocc

#endif  // STOCC_ATTENTION_H_
