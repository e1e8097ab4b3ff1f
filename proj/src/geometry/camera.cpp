#include "vv/geometry/camera.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <cmath>
#include <string>

namespace vv::geo {

void Intrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) throw GeometryError("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw GeometryError("intrinsics: image extents must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw GeometryError("intrinsics: principal point must lie inside the image");
  }
}

Pose::Pose(const Mat4& camera_to_world) : camera_to_world_(camera_to_world) {
  const Eigen::Matrix3d r = camera_to_world.block<3, 3>(0, 0);
  if (!(r.transpose() * r).isApprox(Eigen::Matrix3d::Identity(), 1e-9) ||
      ((r.transpose() * r) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw GeometryError("pose: rotation block is not orthonormal");
  }
  if (r.determinant() < 0.0) throw GeometryError("pose: rotation has determinant -1");
  const Eigen::RowVector4d last = camera_to_world.row(3);
  if (last != Eigen::RowVector4d(0, 0, 0, 1)) {
    throw GeometryError("pose: last row must be [0, 0, 0, 1]");
  }
}

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) throw GeometryError("look_at: up is parallel to the view direction");
  right.normalize();
  // Camera y points down in the image.
  const Vec3 down = forward.cross(right);
  Mat4 m = Mat4::Identity();
  m.block<3, 1>(0, 0) = right;
  m.block<3, 1>(0, 1) = down;
  m.block<3, 1>(0, 2) = forward;
  m.block<3, 1>(0, 3) = eye;
  return Pose(m);
}

Mat4 Pose::world_to_camera() const {
  Mat4 inv = Mat4::Identity();
  const Eigen::Matrix3d rt = camera_to_world_.block<3, 3>(0, 0).transpose();
  inv.block<3, 3>(0, 0) = rt;
  inv.block<3, 1>(0, 3) = -rt * camera_to_world_.block<3, 1>(0, 3);
  return inv;
}

WorldToGrid::WorldToGrid(double voxel_size, const Vec3& origin) : voxel_size_(voxel_size) {
  if (!(voxel_size > 0.0)) throw GeometryError("world_to_grid: voxel size must be positive");
  matrix_ = Mat4::Identity();
  matrix_.block<3, 3>(0, 0) *= 1.0 / voxel_size;
  matrix_.block<3, 1>(0, 3) = -origin / voxel_size;
}

WorldToGrid::WorldToGrid(const Mat4& matrix, double voxel_size)
    : matrix_(matrix), voxel_size_(voxel_size) {
  if (!(voxel_size > 0.0)) throw GeometryError("world_to_grid: voxel size must be positive");
  const Eigen::Matrix3d r = matrix.block<3, 3>(0, 0) * voxel_size;
  if (((r.transpose() * r) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw GeometryError("world_to_grid: linear part must be a uniform 1/voxel_size scale");
  }
}

Mat4 WorldToGrid::grid_to_world() const { return matrix_.inverse(); }

VoxelFrame VoxelFrame::whole(const GridDims& dims, const WorldToGrid& w2g) {
  return VoxelFrame{dims, w2g.grid_to_world()};
}

VoxelFrame VoxelFrame::offset(const GridDims& dims, const WorldToGrid& w2g, int ox, int oy,
                              int oz) {
  Mat4 shift = Mat4::Identity();
  shift.block<3, 1>(0, 3) = Vec3(ox, oy, oz);
  return VoxelFrame{dims, w2g.grid_to_world() * shift};
}

Vec3 VoxelFrame::voxel_center_world(int i, int j, int k) const {
  const Eigen::Vector4d g(i + 0.5, j + 0.5, k + 0.5, 1.0);
  return (grid_to_world * g).head<3>();
}

void View::validate() const {
  intrinsics.validate();
  const auto n = static_cast<std::size_t>(width()) * static_cast<std::size_t>(height());
  if (depth.size() != n) throw GeometryError("view: depth image does not match intrinsics extents");
  if (color.size() != 3 * n) throw GeometryError("view: color image does not match depth extents");
  for (const float d : depth) {
    if (!(d == 0.0f || (d > 0.0f && d <= depth_max))) {
      throw GeometryError("view: depth value outside (0, depth_max]");
    }
  }
}

}  // namespace vv::geo
