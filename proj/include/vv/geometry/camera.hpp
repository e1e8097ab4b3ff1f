#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace vv::geo {

using Mat4 = Eigen::Matrix4d;
using Vec3 = Eigen::Vector3d;

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Pinhole intrinsics in pixels. Pixel (i, j) covers [i, i+1) x [j, j+1).
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const;
};

/// Rigid camera-to-world transform (camera looks down +z, x right, y down).
class Pose {
 public:
  Pose() : camera_to_world_(Mat4::Identity()) {}
  /// Validates orthonormality (1e-9), det = +1 and the homogeneous last row.
  explicit Pose(const Mat4& camera_to_world);

  static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

  const Mat4& camera_to_world() const { return camera_to_world_; }
  Mat4 world_to_camera() const;
  Vec3 position() const { return camera_to_world_.block<3, 1>(0, 3); }

 private:
  Mat4 camera_to_world_;
};

/// Affine map from world meters to continuous grid coordinates (voxel units).
class WorldToGrid {
 public:
  WorldToGrid() : WorldToGrid(1.0, Vec3::Zero()) {}
  /// Grid coordinate g = (world - origin) / voxel_size.
  WorldToGrid(double voxel_size, const Vec3& origin);
  /// Accepts any matrix whose linear part is (1/voxel_size) times a rotation.
  WorldToGrid(const Mat4& matrix, double voxel_size);

  const Mat4& matrix() const { return matrix_; }
  double voxel_size() const { return voxel_size_; }
  Mat4 grid_to_world() const;

 private:
  Mat4 matrix_;
  double voxel_size_;
};

struct GridDims {
  int x = 0;
  int y = 0;
  int z = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  /// Row-major with z fastest, matching the [C, X, Y, Z] tensor layout.
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(y) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(z) +
           static_cast<std::size_t>(k);
  }
  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < x && j < y && k < z;
  }
  bool operator==(const GridDims&) const = default;
};

/// A box of voxels together with where its voxel coordinates sit in the world.
/// The linear part of grid_to_world is voxel_size times a rotation; chunk
/// rotations about the vertical axis live entirely in this transform.
struct VoxelFrame {
  GridDims dims;
  Mat4 grid_to_world = Mat4::Identity();

  /// The whole grid described by a WorldToGrid.
  static VoxelFrame whole(const GridDims& dims, const WorldToGrid& w2g);
  /// Voxel (0,0,0) of the frame is voxel `origin` of the parent grid.
  static VoxelFrame offset(const GridDims& dims, const WorldToGrid& w2g, int ox, int oy, int oz);
  Vec3 voxel_center_world(int i, int j, int k) const;
};

/// An RGB-D frame. Color is interleaved RGB in [0, 1] (row-major, 3 per pixel);
/// depth is meters with 0 marking an invalid measurement.
struct View {
  int id = 0;
  Intrinsics intrinsics;
  Pose pose;
  double depth_max = 10.0;
  std::vector<float> color;
  std::vector<float> depth;

  int width() const { return intrinsics.width; }
  int height() const { return intrinsics.height; }
  float depth_at(int px, int py) const { return depth[static_cast<std::size_t>(py) * width() + px]; }
  void validate() const;
};

/// Integer pixel index (u = column, v = row).
struct Pixel {
  int u = 0;
  int v = 0;
  bool operator==(const Pixel&) const = default;
};

}  // namespace vv::geo
