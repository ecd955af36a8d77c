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
#ifndef STOCC_GRID_IO_H_
#define STOCC_GRID_IO_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "stocc/geometry.h"

namespace stocc {

// OCG1 layout, all little-endian:
//   'O' 'C' 'G' '1'
//   u32 H, u32 W, u32 Z, u32 C, u32 dtype
//   f64 origin[3], f64 voxel_size
//   payload in ((z * H + y) * W + x) * C + c order
enum class OcgDtype : std::uint32_t { kFloat32 = 0, kLabel8 = 1 };

inline constexpr std::size_t kOcgHeaderBytes = 4 + 5 * 4 + 4 * 8;

struct OcgHeader {
  GridSpec spec;
  OcgDtype dtype = OcgDtype::kFloat32;

  std::size_t PayloadBytes() const;
};

using OcgContents = std::variant<VoxelGrid, LabelGrid>;

// Float grids are narrowed to 32-bit on encode.
std::vector<std::uint8_t> EncodeOcg(const VoxelGrid& grid);
std::vector<std::uint8_t> EncodeOcg(const LabelGrid& grid);

// Throws IoError on bad magic, unknown dtype or a size mismatch.
OcgHeader DecodeOcgHeader(std::span<const std::uint8_t> bytes);
OcgContents DecodeOcg(std::span<const std::uint8_t> bytes);

void WriteOcg(const std::filesystem::path& path, const VoxelGrid& grid);
void WriteOcg(const std::filesystem::path& path, const LabelGrid& grid);
OcgContents ReadOcg(const std::filesystem::path& path);
VoxelGrid ReadOcgVoxels(const std::filesystem::path& path);
LabelGrid ReadOcgLabels(const std::filesystem::path& path);

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const std::uint8_t> bytes);

// One pose per line, 16 whitespace-separated decimals, row-major. Frame ids
// are assigned from the line order.
std::string FormatPoses(std::span<const Pose> poses);
std::vector<Pose> ParsePoses(const std::string& text);
void WritePoseFile(const std::filesystem::path& path,
                   std::span<const Pose> poses);
std::vector<Pose> ReadPoseFile(const std::filesystem::path& path);

}  // namespace stocc

#endif  // STOCC_GRID_IO_H_
