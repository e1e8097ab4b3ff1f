#include "vv/geometry/grids.hpp"

#include <algorithm>
#include <cmath>

namespace vv::geo {

OccupancyGrid::OccupancyGrid(const GridDims& d, const WorldToGrid& w2g)
    : dims(d), world_to_grid(w2g), occupied(d.count(), 0), known(d.count(), 0) {}

bool OccupancyGrid::consistent() const {
  for (std::size_t i = 0; i < occupied.size(); ++i) {
    if (occupied[i] && !known[i]) return false;
  }
  return true;
}

std::size_t LabelGrid::annotated_count() const {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), is_annotated));
}

AssociationMap::AssociationMap(const GridDims& dims, int downsample, int image_width,
                               int image_height)
    : dims_(dims),
      downsample_(downsample),
      feature_width_((image_width + downsample - 1) / downsample),
      feature_height_((image_height + downsample - 1) / downsample),
      pixels_(dims.count(), -1) {
  if (downsample < 1) throw GeometryError("association map: downsample must be >= 1");
}

std::optional<Pixel> AssociationMap::at(std::size_t voxel) const {
  const auto p = pixels_.at(voxel);
  if (p < 0) return std::nullopt;
  return Pixel{p % feature_width_, p / feature_width_};
}

void AssociationMap::set(std::size_t voxel, std::optional<Pixel> pixel) {
  if (!pixel) {
    pixels_.at(voxel) = -1;
    return;
  }
  if (pixel->u < 0 || pixel->v < 0 || pixel->u >= feature_width_ || pixel->v >= feature_height_) {
    throw GeometryError("association map: pixel outside the feature image");
  }
  pixels_.at(voxel) = pixel->v * feature_width_ + pixel->u;
}

std::size_t AssociationMap::associated_count() const {
  return static_cast<std::size_t>(
      std::count_if(pixels_.begin(), pixels_.end(), [](std::int32_t p) { return p >= 0; }));
}

namespace {

std::optional<Pixel> project_center(const Mat4& world_to_camera, const VoxelFrame& frame, int i,
                                    int j, int k, const View& view, int downsample,
                                    double depth_threshold) {
  const Vec3 world = frame.voxel_center_world(i, j, k);
  const Vec3 cam = (world_to_camera * world.homogeneous()).head<3>();
  if (cam.z() <= 0.0) return std::nullopt;
  const auto& in = view.intrinsics;
  const double u = in.fx * cam.x() / cam.z() + in.cx;
  const double v = in.fy * cam.y() / cam.z() + in.cy;
  if (!(u >= 0.0 && v >= 0.0 && u < in.width && v < in.height)) return std::nullopt;
  const int px = static_cast<int>(std::floor(u));
  const int py = static_cast<int>(std::floor(v));
  const double sensed = view.depth_at(px, py);
  if (!(sensed > 0.0)) return std::nullopt;
  if (std::abs(cam.z() - sensed) > depth_threshold) return std::nullopt;
  return Pixel{px / downsample, py / downsample};
}

}  // namespace

std::optional<Pixel> project_voxel(int i, int j, int k, const VoxelFrame& frame, const View& view,
                                   int downsample, double depth_threshold) {
  if (downsample < 1) throw GeometryError("project_voxel: downsample must be >= 1");
  if (!(depth_threshold > 0.0)) throw GeometryError("project_voxel: depth threshold must be > 0");
  return project_center(view.pose.world_to_camera(), frame, i, j, k, view, downsample,
                        depth_threshold);
}

AssociationMap compute_association_map(const VoxelFrame& frame, const View& view, int downsample,
                                       double depth_threshold) {
  const GridDims& d = frame.dims;
  if (d.x <= 0 || d.y <= 0 || d.z <= 0) {
    throw GeometryError("association map: subvolume extents must be positive");
  }
  if (!(depth_threshold > 0.0)) throw GeometryError("association map: depth threshold must be > 0");
  AssociationMap map(d, downsample, view.width(), view.height());
  const Mat4 world_to_camera = view.pose.world_to_camera();
  for (int i = 0; i < d.x; ++i) {
    for (int j = 0; j < d.y; ++j) {
      for (int k = 0; k < d.z; ++k) {
        map.set(d.index(i, j, k),
                project_center(world_to_camera, frame, i, j, k, view, downsample, depth_threshold));
      }
    }
  }
  return map;
}

void pixel_ray_in_grid(const View& view, double u, double v, const Mat4& world_to_grid,
                       Vec3& origin, Vec3& direction) {
  const auto& in = view.intrinsics;
  const Vec3 cam_dir((u - in.cx) / in.fx, (v - in.cy) / in.fy, 1.0);
  const Mat4& c2w = view.pose.camera_to_world();
  const Vec3 world_dir = c2w.block<3, 3>(0, 0) * cam_dir;
  origin = (world_to_grid * view.pose.position().homogeneous()).head<3>();
  direction = world_to_grid.block<3, 3>(0, 0) * world_dir;
}

OccupancyGrid fuse_views_to_occupancy(const std::vector<View>& views, const GridDims& dims,
                                      const WorldToGrid& w2g) {
  OccupancyGrid grid(dims, w2g);
  std::vector<std::uint8_t> free(dims.count(), 0);
  const double trunc = w2g.voxel_size();
  for (const auto& view : views) {
    for (int py = 0; py < view.height(); ++py) {
      for (int px = 0; px < view.width(); ++px) {
        const double d = view.depth_at(px, py);
        if (!(d > 0.0)) continue;
        Vec3 origin, dir;
        pixel_ray_in_grid(view, px + 0.5, py + 0.5, w2g.matrix(), origin, dir);
        traverse_ray(dims, origin, dir, 0.0, d + 2.0 * trunc, [&](const RayCell& c) {
          const double mid = 0.5 * (c.t_enter + c.t_exit);
          if (mid > d + trunc) return false;
          const auto idx = dims.index(c.i, c.j, c.k);
          if (mid < d - trunc) {
            free[idx] = 1;
          } else {
            grid.occupied[idx] = 1;
          }
          return true;
        });
      }
    }
  }
  for (std::size_t i = 0; i < free.size(); ++i) {
    grid.known[i] = (grid.occupied[i] || free[i]) ? 1 : 0;
  }
  return grid;
}

}  // namespace vv::geo
