#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "vv/common/config.hpp"
#include "vv/datagen/scene.hpp"
#include "vv/geometry/camera.hpp"

namespace vv::data {

struct ChunkSpec {
  int x = 31;
  int y = 31;
  int z = 62;

  geo::GridDims dims() const { return {x, y, z}; }
  int center_x() const { return x / 2; }
  int center_y() const { return y / 2; }
};

struct SamplerConfig {
  ChunkSpec chunk;
  std::vector<ClassId> structural_class_ids{kWall, kFloor};
  double structural_discard_prob = 0.95;
  double min_annotated_fraction = 0.70;
  int k_views = 3;
  int rotations = 8;
  int downsample = 8;              ///< feature-map downsample used for view selection
  double depth_threshold = 0.048;  ///< association depth pruning, meters
  std::uint64_t seed = 0;

  void validate() const;
  /// Reads `sample.*` keys plus the chunk extents from `net.chunk_*`.
  static SamplerConfig from_config(const KeyValueConfig& cfg);
};

/// A training chunk. Geometry and column labels are derived data, rebuilt
/// from the scene by materialize().
struct Sample {
  int scene = 0;
  int origin_x = 0;
  int origin_y = 0;
  int rotation = 0;  ///< multiples of 45 degrees about z
  std::vector<int> view_ids;

  geo::VoxelFrame frame;
  std::vector<std::uint8_t> occupied;  ///< chunk voxels, GridDims order
  std::vector<std::uint8_t> known;
  std::vector<ClassId> column_labels;  ///< chunk.z entries, bottom to top
};

/// Chunk-to-world frame of a chunk at (ox, oy) rotated by rotation * 45
/// degrees about the vertical axis through its center column.
geo::VoxelFrame chunk_frame(const geo::OccupancyGrid& grid, const ChunkSpec& chunk, int ox, int oy,
                            int rotation);

/// Fills frame, geometry and column labels of `sample` from `scene` using
/// nearest-voxel lookup; voxels outside the scene are unknown and unannotated.
void materialize(const Scene& scene, const ChunkSpec& chunk, Sample& sample);

enum class Verdict { Accept, EmptyColumn, TooFewAnnotated, StructuralDiscard };

/// Applies the three sampling filters to one center column. The random draw
/// happens only for columns whose annotated labels are all structural.
Verdict judge_column(std::span<const std::uint8_t> occupied, std::span<const ClassId> labels,
                     const SamplerConfig& config, std::mt19937_64& rng);

struct SamplingResult {
  std::vector<Sample> samples;
  std::size_t attempts = 0;
  bool cap_reached = false;  ///< stopped at 1000 * n_wanted attempts
};

/// Rejection-samples center columns anywhere in the scene until `n_wanted`
/// pass the filters, then selects up to k views for each by greedy coverage.
/// Samples carry rotation 0.
SamplingResult sample_chunks(const Scene& scene, int scene_index, const SamplerConfig& config,
                             std::size_t n_wanted);

/// The `rotations` variants of `sample` at multiples of 360/rotations degrees.
std::vector<Sample> augment_rotations(const Scene& scene, const Sample& sample,
                                      const SamplerConfig& config);

/// median(freq) / freq_c clamped to [0.1, 10], absent classes at 10, then
/// scaled to mean 1.
std::vector<double> class_weights_from_counts(std::span<const std::uint64_t> counts);
std::vector<double> class_histogram_weights(std::span<const Sample> samples, int n_classes);

}  // namespace vv::data
