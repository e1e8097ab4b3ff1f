#pragma once

#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "vv/datagen/sampler.hpp"
#include "vv/networks/networks.hpp"

// Glue from scenes and samples to network inputs, shared by training and
// inference.

namespace vv::train {

/// View color as a [3, H, W] tensor.
Tensor image_tensor(const geo::View& view);

/// Chunk geometry as a [2, X, Y, Z] tensor (occupied, known).
Tensor geometry_tensor(const geo::GridDims& dims, std::span<const std::uint8_t> occupied,
                       std::span<const std::uint8_t> known);

/// Mean color of the full-resolution pixels associated with each voxel over
/// `views`, [3, X, Y, Z]; zero where no pixel maps.
Tensor voxel_color(const geo::VoxelFrame& frame, std::span<const geo::View* const> views,
                   double depth_threshold);

const geo::View& find_view(const data::Scene& scene, int view_id);

/// Per-view derived data that depends only on the scene: proxy labels and,
/// when a fixed model is used, encoder features. Safe for concurrent use.
class SceneCache {
 public:
  const std::vector<ClassId>& proxy_labels(const data::Scene& scene, int scene_index, int view_id,
                                           int downsample);
  /// Encoder features without a graph, computed once per (scene, view).
  const Tensor& features(const nn::Model& model, const data::Scene& scene, int scene_index,
                         int view_id);

 private:
  std::mutex mutex_;
  std::map<std::pair<int, int>, std::vector<ClassId>> proxy_;
  std::map<std::pair<int, int>, Tensor> features_;
};

struct PipelineOptions {
  double depth_threshold = 0.048;
  nn::ForwardOptions forward;
  /// Reuse cached encoder features instead of encoding on the graph. Only
  /// valid while the weights are fixed (inference).
  bool cached_features = false;
};

struct SampleOutput {
  Tensor column_logits;                          ///< [Z, n_classes]
  std::vector<Tensor> proxy_logits;              ///< per view with an image path
  std::vector<std::vector<ClassId>> proxy_labels;
};

/// Runs the network on one materialized sample: encodes its views with the
/// shared encoder, backprojects and max-pools the features, and runs the 3D
/// network in the model's input mode.
SampleOutput forward_sample(Graph* graph, const nn::Model& model, const data::Scene& scene,
                            int scene_index, const data::Sample& sample, SceneCache& cache,
                            const PipelineOptions& options);

}  // namespace vv::train
