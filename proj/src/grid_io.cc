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

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "stocc/common.h"

namespace stocc {
namespace {

constexpr std::uint8_t kMagic[4] = {'O', 'C', 'G', '1'};

class ByteWriter {
 public:
  explicit ByteWriter(std::size_t reserve) { bytes_.reserve(reserve); }

  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back((v >> (8 * i)) & 0xff);
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back((v >> (8 * i)) & 0xff);
  }
  void F32(float v) { U32(std::bit_cast<std::uint32_t>(v)); }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }
  void Raw(std::span<const std::uint8_t> raw) {
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }

  std::vector<std::uint8_t> Take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t U64() {
    Need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  float F32() { return std::bit_cast<float>(U32()); }
  double F64() { return std::bit_cast<double>(U64()); }
  std::uint8_t U8() {
    Need(1);
    return bytes_[pos_++];
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void Need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("OCG1 stream truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void WriteHeader(ByteWriter& w, const GridSpec& spec, OcgDtype dtype,
                 int channels) {
  w.Raw(kMagic);
  w.U32(static_cast<std::uint32_t>(spec.dims.h));
  w.U32(static_cast<std::uint32_t>(spec.dims.w));
  w.U32(static_cast<std::uint32_t>(spec.dims.z));
  w.U32(static_cast<std::uint32_t>(channels));
  w.U32(static_cast<std::uint32_t>(dtype));
  w.F64(spec.origin.x());
  w.F64(spec.origin.y());
  w.F64(spec.origin.z());
  w.F64(spec.voxel_size);
}

OcgHeader ReadHeader(ByteReader& r, std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError("not an OCG1 file (bad magic)");
  }
  for (int i = 0; i < 4; ++i) r.U8();
  OcgHeader h;
  const std::uint32_t hh = r.U32();
  const std::uint32_t ww = r.U32();
  const std::uint32_t zz = r.U32();
  const std::uint32_t cc = r.U32();
  const std::uint32_t dtype = r.U32();
  if (dtype > 1) throw IoError("OCG1 unknown dtype " + std::to_string(dtype));
  constexpr std::uint32_t kMaxDim = 1u << 20;
  if (hh == 0 || ww == 0 || zz == 0 || hh > kMaxDim || ww > kMaxDim ||
      zz > kMaxDim || cc > kMaxDim) {
    throw IoError("OCG1 header has invalid dimensions");
  }
  h.dtype = static_cast<OcgDtype>(dtype);
  h.spec.dims = {static_cast<int>(hh), static_cast<int>(ww),
                 static_cast<int>(zz)};
  h.spec.channels = static_cast<int>(cc);
  const double ox = r.F64();
  const double oy = r.F64();
  const double oz = r.F64();
  h.spec.origin = Vec3(ox, oy, oz);
  h.spec.voxel_size = r.F64();
  try {
    h.spec.Validate();
  } catch (const InvalidArgumentError& e) {
    throw IoError(std::string("OCG1 header: ") + e.what());
  }
  return h;
}

}  // namespace

std::size_t OcgHeader::PayloadBytes() const {
  const std::size_t cells = static_cast<std::size_t>(spec.Cells());
  const std::size_t channels = static_cast<std::size_t>(spec.channels);
  return dtype == OcgDtype::kFloat32 ? cells * channels * 4 : cells * channels;
}

std::vector<std::uint8_t> EncodeOcg(const VoxelGrid& grid) {
  ByteWriter w(kOcgHeaderBytes + grid.data().size() * 4);
  WriteHeader(w, grid.spec(), OcgDtype::kFloat32, grid.channels());
  for (double v : grid.data()) w.F32(static_cast<float>(v));
  return w.Take();
}

std::vector<std::uint8_t> EncodeOcg(const LabelGrid& grid) {
  ByteWriter w(kOcgHeaderBytes + grid.data().size());
  WriteHeader(w, grid.spec(), OcgDtype::kLabel8, 1);
  w.Raw(grid.data());
  return w.Take();
}

OcgHeader DecodeOcgHeader(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  return ReadHeader(r, bytes);
}

OcgContents DecodeOcg(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const OcgHeader h = ReadHeader(r, bytes);
  if (r.remaining() != h.PayloadBytes()) {
    throw IoError("OCG1 payload size " + std::to_string(r.remaining()) +
                  " does not match header (expected " +
                  std::to_string(h.PayloadBytes()) + ")");
  }
  if (h.dtype == OcgDtype::kFloat32) {
    VoxelGrid grid(h.spec);
    for (double& v : grid.data()) v = static_cast<double>(r.F32());
    return grid;
  }
  if (h.spec.channels != 1) {
    throw IoError("OCG1 label grids must have exactly one channel");
  }
  LabelGrid grid(h.spec, 0);
  for (auto& v : grid.data()) v = r.U8();
  return grid;
}

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void WriteOcg(const std::filesystem::path& path, const VoxelGrid& grid) {
  WriteFileBytes(path, EncodeOcg(grid));
}

void WriteOcg(const std::filesystem::path& path, const LabelGrid& grid) {
  WriteFileBytes(path, EncodeOcg(grid));
}

OcgContents ReadOcg(const std::filesystem::path& path) {
  const auto bytes = ReadFileBytes(path);
  try {
    return DecodeOcg(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

VoxelGrid ReadOcgVoxels(const std::filesystem::path& path) {
  auto contents = ReadOcg(path);
  if (auto* grid = std::get_if<VoxelGrid>(&contents)) return std::move(*grid);
  throw IoError(path.string() + ": expected a float32 OCG1 grid");
}

LabelGrid ReadOcgLabels(const std::filesystem::path& path) {
  auto contents = ReadOcg(path);
  if (auto* grid = std::get_if<LabelGrid>(&contents)) return std::move(*grid);
  throw IoError(path.string() + ": expected a label OCG1 grid");
}

std::string FormatPoses(std::span<const Pose> poses) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const Pose& pose : poses) {
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        if (r != 0 || c != 0) out << ' ';
        out << pose.matrix()(r, c);
      }
    }
    out << '\n';
  }
  return out.str();
}

std::vector<Pose> ParsePoses(const std::string& text) {
  std::vector<Pose> poses;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    Mat4 m;
    for (int i = 0; i < 16; ++i) {
      if (!(fields >> m(i / 4, i % 4))) {
        throw IoError("pose line " + std::to_string(line_no) +
                      ": expected 16 numbers");
      }
    }
    std::string extra;
    if (fields >> extra) {
      throw IoError("pose line " + std::to_string(line_no) +
                    ": trailing data");
    }
    try {
      poses.emplace_back(m, static_cast<int>(poses.size()));
    } catch (const InvalidArgumentError& e) {
      throw IoError("pose line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return poses;
}

void WritePoseFile(const std::filesystem::path& path,
                   std::span<const Pose> poses) {
  const std::string text = FormatPoses(poses);
  WriteFileBytes(path, std::span(reinterpret_cast<const std::uint8_t*>(
                                     text.data()),
                                 text.size()));
}

std::vector<Pose> ReadPoseFile(const std::filesystem::path& path) {
  const auto bytes = ReadFileBytes(path);
  return ParsePoses(std::string(bytes.begin(), bytes.end()));
}

}  // namespace stocc
