#pragma once

#include <filesystem>
#include <vector>

#include "vv/geometry/grids.hpp"

// Scene file ("VVSCN1\n"), little-endian:
//   dims: 3 x uint64 (X, Y, Z)
//   voxel_size: double
//   world_to_grid: 16 doubles, row-major
//   occupied bitset, known bitset: ceil(X*Y*Z / 8) bytes each; bit n of the
//     stream (byte n/8, LSB first) is voxel n in (x*Y + y)*Z + z order
//   labels: X*Y*Z bytes, 255 = unannotated
//
// View file ("VVVIEW1\n"), little-endian:
//   fx, fy, cx, cy, depth_min, depth_max: 6 doubles
//   width, height: 2 x int32
//   camera_to_world: 16 doubles, row-major
//   depth: width*height float32 meters, row-major, 0 = invalid
//   color: width*height RGB byte triples
//
// A scene's views live next to it as "<scene>.view000", "<scene>.view001", ...

namespace vv::geo {

struct SceneVolume {
  OccupancyGrid grid;
  LabelGrid labels;
};

void save_scene(const std::filesystem::path& path, const OccupancyGrid& grid,
                const LabelGrid& labels);
SceneVolume load_scene(const std::filesystem::path& path);

/// Colors are quantized to 8 bits on write.
void save_view(const std::filesystem::path& path, const View& view);
View load_view(const std::filesystem::path& path, int id);

std::filesystem::path scene_view_path(const std::filesystem::path& scene_path, int index);
void save_scene_views(const std::filesystem::path& scene_path, const std::vector<View>& views);
/// Loads views 0, 1, ... until the next file is missing; ids follow the index.
std::vector<View> load_scene_views(const std::filesystem::path& scene_path);

/// Rounds colors to the nearest k/255 so they survive a save/load unchanged.
void quantize_colors(View& view);

}  // namespace vv::geo
