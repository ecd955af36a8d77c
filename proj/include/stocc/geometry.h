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
#ifndef STOCC_GEOMETRY_H_
#define STOCC_GEOMETRY_H_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace stocc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat4 = Eigen::Matrix4d;

// Rigid-body transform taking points from an ego frame into the scene frame.
class Pose {
 public:
  Pose() : matrix_(Mat4::Identity()) {}

  // Validates the bottom row and the orthonormality of the rotation block.
  // Throws InvalidArgumentError on violation.
  explicit Pose(const Mat4& matrix, int frame_id = 0);

  static Pose Identity(int frame_id = 0);
  static Pose Translation(double x, double y, double z, int frame_id = 0);
  // Rotation about +z by `radians`, followed by translation t.
  static Pose RotZ(double radians, const Vec3& t = Vec3::Zero(),
                   int frame_id = 0);

  const Mat4& matrix() const { return matrix_; }
  int frame_id() const { return frame_id_; }
  Eigen::Matrix3d rotation() const { return matrix_.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return matrix_.topRightCorner<3, 1>(); }

  Vec3 Apply(const Vec3& p) const { return rotation() * p + translation(); }
  // Rigid inverse [R^T | -R^T t].
  Pose Inverse() const;
  Pose operator*(const Pose& rhs) const;

 private:
  Mat4 matrix_;
  int frame_id_ = 0;
};

// Returns curr^-1 * prev: maps points expressed in the previous ego frame into
// the current ego frame. Throws DegeneratePoseError if either matrix has
// |det| < 1e-12.
Pose RelativeTransform(const Pose& prev, const Pose& curr);

struct GridDims {
  int h = 1;  // y extent
  int w = 1;  // x extent
  int z = 1;

  std::int64_t Cells() const {
    return static_cast<std::int64_t>(h) * w * z;
  }
  bool operator==(const GridDims&) const = default;
};

// Geometry of a dense voxel grid. Voxel (x, y, z) has its center at
// origin + (x, y, z) * voxel_size, so voxel centers sit on integer fractional
// coordinates.
struct GridSpec {
  Vec3 origin = Vec3::Zero();
  double voxel_size = 1.0;
  GridDims dims;
  int channels = 1;

  // Throws InvalidArgumentError unless voxel_size > 0, dims >= 1,
  // channels >= 0 and the extent is finite.
  void Validate() const;

  std::int64_t Cells() const { return dims.Cells(); }
  std::int64_t Size() const { return Cells() * channels; }

  std::int64_t CellIndex(int x, int y, int z) const {
    return (static_cast<std::int64_t>(z) * dims.h + y) * dims.w + x;
  }
  bool Contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims.w && y < dims.h &&
           z < dims.z;
  }
  Vec3 VoxelCenter(int x, int y, int z) const {
    return origin + voxel_size * Vec3(x, y, z);
  }
  // Corners of the box covered by the voxels' cells:
  // [origin - voxel_size / 2, origin + (dims - 1/2) * voxel_size].
  std::array<Vec3, 8> ExtentCorners() const;

  bool SameLattice(const GridSpec& other) const;
};

// (point - origin) / voxel_size. Out-of-range results are valid.
Vec3 WorldToGrid(const GridSpec& spec, const Vec3& point);

// Dense real-valued H x W x Z x C field. Linear index is
// ((z * H + y) * W + x) * C + c.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  explicit VoxelGrid(const GridSpec& spec, double fill = 0.0);

  const GridSpec& spec() const { return spec_; }
  int channels() const { return spec_.channels; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  std::span<double> At(std::int64_t cell) {
    return std::span<double>(data_).subspan(cell * spec_.channels,
                                            spec_.channels);
  }
  std::span<const double> At(std::int64_t cell) const {
    return std::span<const double>(data_).subspan(cell * spec_.channels,
                                                  spec_.channels);
  }
  std::span<double> At(int x, int y, int z) {
    return At(spec_.CellIndex(x, y, z));
  }
  std::span<const double> At(int x, int y, int z) const {
    return At(spec_.CellIndex(x, y, z));
  }
  double& operator()(int x, int y, int z, int c) {
    return data_[spec_.CellIndex(x, y, z) * spec_.channels + c];
  }
  double operator()(int x, int y, int z, int c) const {
    return data_[spec_.CellIndex(x, y, z) * spec_.channels + c];
  }

  std::size_t Bytes() const { return data_.size() * sizeof(double); }
  bool AllFinite() const;

 private:
  GridSpec spec_;
  std::vector<double> data_;
};

// Dense categorical grid, one 8-bit value per voxel (channels is ignored).
class LabelGrid {
 public:
  LabelGrid() = default;
  LabelGrid(const GridSpec& spec, std::uint8_t fill);

  const GridSpec& spec() const { return spec_; }
  std::span<std::uint8_t> data() { return data_; }
  std::span<const std::uint8_t> data() const { return data_; }
  std::uint8_t& operator[](std::int64_t cell) { return data_[cell]; }
  std::uint8_t operator[](std::int64_t cell) const { return data_[cell]; }
  std::uint8_t& operator()(int x, int y, int z) {
    return data_[spec_.CellIndex(x, y, z)];
  }
  std::uint8_t operator()(int x, int y, int z) const {
    return data_[spec_.CellIndex(x, y, z)];
  }
  std::int64_t Cells() const { return static_cast<std::int64_t>(data_.size()); }

  bool operator==(const LabelGrid& other) const { return data_ == other.data_; }

 private:
  GridSpec spec_;
  std::vector<std::uint8_t> data_;
};

// Trilinear interpolation over the 8 enclosing nodes. Nodes outside the grid
// contribute zero. `out` must have grid.channels() entries.
void SampleTrilinear(const VoxelGrid& grid, const Vec3& coord,
                     std::span<double> out);
std::vector<std::vector<double>> SampleTrilinear(const VoxelGrid& grid,
                                                 std::span<const Vec3> coords);

// Bilinear interpolation in the fixed z layer. Nodes outside contribute zero.
// Throws IndexError when z_layer is not in [0, Z).
void SampleBilinearXY(const VoxelGrid& grid, const Vec2& coord, int z_layer,
                      std::span<double> out);
std::vector<std::vector<double>> SampleBilinearXY(const VoxelGrid& grid,
                                                  std::span<const Vec2> coords,
                                                  int z_layer);

// Nearest voxel to a fractional coordinate (ties round up), or -1 when the
// rounded voxel is outside the grid.
std::int64_t NearestCell(const GridSpec& spec, const Vec3& coord);

}  // namespace stocc

#endif  // STOCC_GEOMETRY_H_
