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
#include "stocc/geometry.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "stocc/common.h"

namespace stocc {
namespace {

constexpr double kOrthonormalTolerance = 1e-6;
constexpr double kMinDeterminant = 1e-12;

void CheckDeterminant(const Mat4& m) {
  if (std::abs(m.determinant()) < kMinDeterminant) {
    throw DegeneratePoseError("pose matrix is not invertible");
  }
}

// Accumulates weight * node into out, skipping zero weights and nodes outside
// the grid (zero padding).
inline void AccumulateNode(const VoxelGrid& grid, int x, int y, int z,
                           double weight, std::span<double> out) {
  if (weight == 0.0 || !grid.spec().Contains(x, y, z)) return;
  const auto node = grid.At(x, y, z);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] += weight * node[c];
}

}  // namespace

Pose::Pose(const Mat4& matrix, int frame_id)
    : matrix_(matrix), frame_id_(frame_id) {
  if (!matrix.allFinite()) {
    throw InvalidArgumentError("pose matrix has non-finite entries");
  }
  if (matrix(3, 0) != 0.0 || matrix(3, 1) != 0.0 || matrix(3, 2) != 0.0 ||
      matrix(3, 3) != 1.0) {
    throw InvalidArgumentError("pose bottom row must be [0 0 0 1]");
  }
  const Eigen::Matrix3d r = matrix.topLeftCorner<3, 3>();
  const double err = (r.transpose() * r - Eigen::Matrix3d::Identity())
                         .cwiseAbs()
                         .maxCoeff();
  if (err > kOrthonormalTolerance) {
    throw InvalidArgumentError("pose rotation block is not orthonormal");
  }
}

Pose Pose::Identity(int frame_id) { return Pose(Mat4::Identity(), frame_id); }

Pose Pose::Translation(double x, double y, double z, int frame_id) {
  Mat4 m = Mat4::Identity();
  m(0, 3) = x;
  m(1, 3) = y;
  m(2, 3) = z;
  return Pose(m, frame_id);
}

Pose Pose::RotZ(double radians, const Vec3& t, int frame_id) {
  Mat4 m = Mat4::Identity();
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  m(0, 0) = c;
  m(0, 1) = -s;
  m(1, 0) = s;
  m(1, 1) = c;
  m.topRightCorner<3, 1>() = t;
  return Pose(m, frame_id);
}

Pose Pose::Inverse() const {
  CheckDeterminant(matrix_);
  Mat4 inv = Mat4::Identity();
  const Eigen::Matrix3d rt = rotation().transpose();
  inv.topLeftCorner<3, 3>() = rt;
  inv.topRightCorner<3, 1>() = -rt * translation();
  Pose out;
  out.matrix_ = inv;
  out.frame_id_ = frame_id_;
  return out;
}

Pose Pose::operator*(const Pose& rhs) const {
  Mat4 m = matrix_ * rhs.matrix_;
  m.row(3) << 0.0, 0.0, 0.0, 1.0;
  Pose out;
  out.matrix_ = m;
  out.frame_id_ = rhs.frame_id_;
  return out;
}

Pose RelativeTransform(const Pose& prev, const Pose& curr) {
  CheckDeterminant(prev.matrix());
  return curr.Inverse() * prev;
}

void GridSpec::Validate() const {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw InvalidArgumentError("voxel_size must be positive and finite");
  }
  if (dims.h < 1 || dims.w < 1 || dims.z < 1) {
    throw InvalidArgumentError("grid dims must all be >= 1");
  }
  if (channels < 0) throw InvalidArgumentError("channels must be >= 0");
  const Vec3 far = origin + voxel_size * Vec3(dims.w, dims.h, dims.z);
  if (!origin.allFinite() || !far.allFinite()) {
    throw InvalidArgumentError("grid extent is not finite");
  }
}

std::array<Vec3, 8> GridSpec::ExtentCorners() const {
  const Vec3 size = voxel_size * Vec3(dims.w, dims.h, dims.z);
  const Vec3 low = origin - Vec3::Constant(0.5 * voxel_size);
  std::array<Vec3, 8> corners;
  for (int i = 0; i < 8; ++i) {
    corners[i] = low + Vec3((i & 1) ? size.x() : 0.0,
                               (i & 2) ? size.y() : 0.0,
                               (i & 4) ? size.z() : 0.0);
  }
  return corners;
}

bool GridSpec::SameLattice(const GridSpec& other) const {
  return dims == other.dims && voxel_size == other.voxel_size &&
         origin == other.origin;
}

Vec3 WorldToGrid(const GridSpec& spec, const Vec3& point) {
  return (point - spec.origin) / spec.voxel_size;
}

VoxelGrid::VoxelGrid(const GridSpec& spec, double fill) : spec_(spec) {
  spec_.Validate();
  data_.assign(static_cast<std::size_t>(spec_.Size()), fill);
}

bool VoxelGrid::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

LabelGrid::LabelGrid(const GridSpec& spec, std::uint8_t fill) : spec_(spec) {
  spec_.Validate();
  data_.assign(static_cast<std::size_t>(spec_.Cells()), fill);
}

void SampleTrilinear(const VoxelGrid& grid, const Vec3& coord,
                     std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (!coord.allFinite()) return;
  const double fx = std::floor(coord.x());
  const double fy = std::floor(coord.y());
  const double fz = std::floor(coord.z());
  const auto& d = grid.spec().dims;
  // Entirely outside: every enclosing node is padding.
  if (fx < -1.0 || fy < -1.0 || fz < -1.0 || fx >= d.w || fy >= d.h ||
      fz >= d.z) {
    return;
  }
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int z0 = static_cast<int>(fz);
  const double tx = coord.x() - fx;
  const double ty = coord.y() - fy;
  const double tz = coord.z() - fz;
  const double wx[2] = {1.0 - tx, tx};
  const double wy[2] = {1.0 - ty, ty};
  const double wz[2] = {1.0 - tz, tz};
  for (int k = 0; k < 2; ++k) {
    for (int j = 0; j < 2; ++j) {
      for (int i = 0; i < 2; ++i) {
        AccumulateNode(grid, x0 + i, y0 + j, z0 + k, wx[i] * wy[j] * wz[k],
                       out);
      }
    }
  }
}

std::vector<std::vector<double>> SampleTrilinear(const VoxelGrid& grid,
                                                 std::span<const Vec3> coords) {
  std::vector<std::vector<double>> out(
      coords.size(), std::vector<double>(grid.channels(), 0.0));
  for (std::size_t i = 0; i < coords.size(); ++i) {
    SampleTrilinear(grid, coords[i], out[i]);
  }
  return out;
}

void SampleBilinearXY(const VoxelGrid& grid, const Vec2& coord, int z_layer,
                      std::span<double> out) {
  if (z_layer < 0 || z_layer >= grid.spec().dims.z) {
    throw IndexError("z_layer " + std::to_string(z_layer) +
                     " outside [0, " + std::to_string(grid.spec().dims.z) +
                     ")");
  }
  std::fill(out.begin(), out.end(), 0.0);
  if (!coord.allFinite()) return;
  const double fx = std::floor(coord.x());
  const double fy = std::floor(coord.y());
  const auto& d = grid.spec().dims;
  if (fx < -1.0 || fy < -1.0 || fx >= d.w || fy >= d.h) return;
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double tx = coord.x() - fx;
  const double ty = coord.y() - fy;
  const double wx[2] = {1.0 - tx, tx};
  const double wy[2] = {1.0 - ty, ty};
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      AccumulateNode(grid, x0 + i, y0 + j, z_layer, wx[i] * wy[j], out);
    }
  }
}

std::vector<std::vector<double>> SampleBilinearXY(const VoxelGrid& grid,
                                                  std::span<const Vec2> coords,
                                                  int z_layer) {
  std::vector<std::vector<double>> out(
      coords.size(), std::vector<double>(grid.channels(), 0.0));
  for (std::size_t i = 0; i < coords.size(); ++i) {
    SampleBilinearXY(grid, coords[i], z_layer, out[i]);
  }
  return out;
}

std::int64_t NearestCell(const GridSpec& spec, const Vec3& coord) {
  if (!coord.allFinite()) return -1;
  const double rx = std::floor(coord.x() + 0.5);
  const double ry = std::floor(coord.y() + 0.5);
  const double rz = std::floor(coord.z() + 0.5);
  if (rx < 0 || ry < 0 || rz < 0 || rx >= spec.dims.w || ry >= spec.dims.h ||
      rz >= spec.dims.z) {
    return -1;
  }
  return spec.CellIndex(static_cast<int>(rx), static_cast<int>(ry),
                        static_cast<int>(rz));
}

}  // namespace stocc
