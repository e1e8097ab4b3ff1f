#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vv/common/config.hpp"
#include "vv/common/labels.hpp"
#include "vv/geometry/camera.hpp"
#include "vv/geometry/grids.hpp"

namespace vv::data {

// Synthetic class set: two structural classes, then three object shapes that
// each come in two albedos. The two members of a pair have identical geometry.
inline constexpr ClassId kWall = 0;
inline constexpr ClassId kFloor = 1;
inline constexpr int kNumClasses = 8;

const std::array<std::string, kNumClasses>& class_names();
/// Base albedo per class.
const std::array<std::array<float, 3>, kNumClasses>& class_albedo();
bool is_structural(ClassId c);
/// Class of the other member of c's color pair, or c for structural classes.
ClassId color_twin(ClassId c);

/// Object and camera layout of a synthetic room. Sizes are in voxels.
struct SceneSpec {
  int size_x = 72;
  int size_y = 72;
  int size_z = 62;
  double voxel_size = 0.048;
  int n_objects = 12;
  std::vector<int> object_classes{2, 3, 4, 5, 6, 7};
  int cube_size = 8;
  int cylinder_radius = 4;
  int cylinder_height = 16;
  int slab_size = 12;
  int slab_thickness = 2;
  int slab_elevation = 10;
  int min_gap = 2;  ///< free voxels between object footprints and walls
  int n_views = 24;
  int image_width = 328;
  int image_height = 256;
  double fov_x_deg = 70.0;
  double orbit_fraction = 0.75;  ///< orbit radius as a fraction of the half room
  double camera_height_fraction = 0.6;
  double target_height_fraction = 0.1;
  double jitter = 0.25;
  double unannotated_fraction = 0.0;
  /// Chunk footprint the room must hold twice in x and y.
  int chunk_x = 31;
  int chunk_y = 31;

  void validate() const;
  /// Reads the `scene.*` keys; unset keys keep their defaults.
  static SceneSpec from_config(const KeyValueConfig& cfg);
};

/// A reconstructed scene as the pipeline consumes it.
struct Scene {
  geo::OccupancyGrid grid;
  geo::LabelGrid labels;
  std::vector<geo::View> views;
};

struct SyntheticScene {
  std::uint64_t seed = 0;
  SceneSpec spec;
  /// Ground-truth solid voxels: class id, or kUnannotated for empty space.
  std::vector<ClassId> solid;
  Scene scene;
};

/// Fully deterministic in (seed, spec). Throws std::invalid_argument when the
/// objects cannot be placed.
SyntheticScene generate_scene(std::uint64_t seed, const SceneSpec& spec);

/// Renders one view of a solid grid: z-depth to the first solid voxel (0 when
/// the ray leaves the grid) and albedo times a per-face shade.
void render_view(const std::vector<ClassId>& solid, const geo::GridDims& dims,
                 const geo::WorldToGrid& w2g, geo::View& view);

/// Labels for the fused-occupied voxels: the voxel's own solid class, else
/// the class of a face neighbor, else of any of the 26 neighbors.
geo::LabelGrid label_occupied_voxels(const geo::OccupancyGrid& grid,
                                     const std::vector<ClassId>& solid);

/// 2D training labels for the encoder's proxy head: each valid depth pixel
/// looks up the voxel just behind its surface point, then each
/// downsample x downsample block takes the majority annotated label (ties to
/// the lowest id). Returned row-major at the downsampled resolution.
std::vector<ClassId> proxy_labels(const geo::View& view, const geo::LabelGrid& labels,
                                  const geo::WorldToGrid& w2g, int downsample);

}  // namespace vv::data
