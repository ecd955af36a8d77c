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
#ifndef STOCC_TESTS_ATTENTION_ORACLE_H_
#define STOCC_TESTS_ATTENTION_ORACLE_H_

#include "stocc/attention.h"

namespace stocc::testing {

// The layer stack run against one value grid only.
inline VoxelGrid SingleSourceStack(const AttentionParams& p, const VoxelGrid& current,
                                   const VoxelGrid& values) {
  VoxelGrid state = current;
  const GridSpec& spec = current.spec();
  for (const AttentionLayer& layer : p.layers) {
    VoxelGrid next(spec);
    for (int z = 0; z < spec.dims.z; ++z) {
      for (int y = 0; y < spec.dims.h; ++y) {
        for (int x = 0; x < spec.dims.w; ++x) {
          const std::int64_t cell = spec.CellIndex(x, y, z);
          const auto s = state.At(cell);
          const VectorXd xv = Eigen::Map<const VectorXd>(s.data(), p.config.channels);
          const VectorXd q = xv + p.position_embedding.row(cell).transpose();
          const VectorXd a =
              DeformableAttend(layer, p.config.num_points, q, Vec3(x, y, z), values);
          const VectorXd h = LayerNorm(xv + a, layer.norm1_scale, layer.norm1_shift);
          const VectorXd out =
              LayerNorm(h + FeedForward(layer, h), layer.norm2_scale, layer.norm2_shift);
          for (int c = 0; c < p.config.channels; ++c) next.At(cell)[c] = out[c];
        }
      }
    }
    state = std::move(next);
  }
  return state;
}

}  // namespace stocc::testing

#endif  // STOCC_TESTS_ATTENTION_ORACLE_H_
