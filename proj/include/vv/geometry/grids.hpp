#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vv/common/labels.hpp"
#include "vv/geometry/camera.hpp"

namespace vv::geo {

/// Ternary voxel state split over two binary channels. occupied implies known.
struct OccupancyGrid {
  GridDims dims;
  WorldToGrid world_to_grid;
  std::vector<std::uint8_t> occupied;
  std::vector<std::uint8_t> known;

  OccupancyGrid() = default;
  OccupancyGrid(const GridDims& d, const WorldToGrid& w2g);

  double voxel_size() const { return world_to_grid.voxel_size(); }
  bool is_occupied(int i, int j, int k) const { return occupied[dims.index(i, j, k)] != 0; }
  bool is_known(int i, int j, int k) const { return known[dims.index(i, j, k)] != 0; }
  /// True iff occupied => known holds everywhere.
  bool consistent() const;
};

struct LabelGrid {
  GridDims dims;
  std::vector<ClassId> labels;

  LabelGrid() = default;
  explicit LabelGrid(const GridDims& d) : dims(d), labels(d.count(), kUnannotated) {}

  ClassId at(int i, int j, int k) const { return labels[dims.index(i, j, k)]; }
  std::size_t annotated_count() const;
};

/// Per-voxel optional pixel in a feature image downsampled by `downsample`.
class AssociationMap {
 public:
  AssociationMap() = default;
  AssociationMap(const GridDims& dims, int downsample, int image_width, int image_height);

  const GridDims& dims() const { return dims_; }
  int downsample() const { return downsample_; }
  /// Downsampled image extents (ceil of full extent / downsample).
  int feature_width() const { return feature_width_; }
  int feature_height() const { return feature_height_; }

  std::optional<Pixel> at(std::size_t voxel) const;
  void set(std::size_t voxel, std::optional<Pixel> pixel);
  /// Flat feature-image index v * feature_width + u, or -1 when empty.
  std::int32_t flat(std::size_t voxel) const { return pixels_[voxel]; }
  const std::vector<std::int32_t>& flat_indices() const { return pixels_; }

  std::size_t associated_count() const;
  bool operator==(const AssociationMap&) const = default;

 private:
  GridDims dims_;
  int downsample_ = 1;
  int feature_width_ = 0;
  int feature_height_ = 0;
  std::vector<std::int32_t> pixels_;
};

/// Projects the center of voxel (i, j, k) of `frame` into `view`.
///
/// Rejects voxels behind the camera, outside the image, over an invalid depth
/// reading, or farther than `depth_threshold` (camera-space depth) from the
/// depth read at the containing full-resolution pixel. On success returns
/// that pixel divided (floor) by `downsample`.
std::optional<Pixel> project_voxel(int i, int j, int k, const VoxelFrame& frame, const View& view,
                                   int downsample, double depth_threshold);

AssociationMap compute_association_map(const VoxelFrame& frame, const View& view, int downsample,
                                       double depth_threshold);

/// Space carving along every valid depth ray (3D DDA), truncation = voxel size.
/// Cells whose ray-interval midpoint lies nearer than depth - truncation become
/// known-free; cells within +-truncation become known-occupied; occupied wins
/// over free once all views are fused.
OccupancyGrid fuse_views_to_occupancy(const std::vector<View>& views, const GridDims& dims,
                                      const WorldToGrid& w2g);

/// One traversed cell of a ray, with the ray parameter (camera depth) at entry
/// and exit.
struct RayCell {
  int i, j, k;
  double t_enter, t_exit;
};

/// Amanatides-Woo traversal of the ray origin + t * direction (grid units) for
/// t in [t_min, t_max], clipped to the grid box. `visit` returns false to stop.
template <typename Visit>
void traverse_ray(const GridDims& dims, const Vec3& origin, const Vec3& direction, double t_min,
                  double t_max, Visit&& visit);

/// Camera center and per-unit-depth direction of pixel (u, v)'s ray (through
/// the pixel center) in the continuous grid coordinates of `frame_world_to_grid`.
void pixel_ray_in_grid(const View& view, double u, double v, const Mat4& world_to_grid,
                       Vec3& origin, Vec3& direction);

}  // namespace vv::geo

#include "vv/geometry/ray_impl.hpp"
