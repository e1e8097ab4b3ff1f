#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vv/training/pipeline.hpp"

namespace vv::infer {

/// Per-voxel predicted class, kUnpredicted where nothing was written.
struct PredictionGrid {
  geo::GridDims dims;
  std::vector<ClassId> labels;

  PredictionGrid() = default;
  explicit PredictionGrid(const geo::GridDims& d) : dims(d), labels(d.count(), kUnpredicted) {}
  ClassId at(int i, int j, int k) const { return labels[dims.index(i, j, k)]; }
};

struct ViewPolicy {
  int k_views = 3;
  int downsample = 8;  ///< feature downsample used for view selection
  double depth_threshold = 0.048;
};

/// Greedy views for the chunk centered on scene column (ci, cj).
std::vector<int> select_column_views(const data::Scene& scene, const data::ChunkSpec& chunk,
                                     int ci, int cj, const ViewPolicy& policy);

struct SlidingWindowOptions {
  ViewPolicy views;
  /// Predict boundary columns too, padding the chunk with unknown space.
  bool pad_boundary = true;
  int threads = 1;
};

struct SlidingWindowResult {
  PredictionGrid grid;
  std::vector<int> writes;  ///< per scene column (i * Y + j), times written
  /// Annotated center-column voxels associated with a selected view, and
  /// all annotated voxels of the predicted columns.
  std::size_t covered_annotated = 0;
  std::size_t total_annotated = 0;
};

/// Predicts every column whose chunk fits the scene, or every column with
/// padding. Throws std::invalid_argument when the scene is smaller than one
/// chunk in x or y.
SlidingWindowResult sliding_window_predict(const data::Scene& scene, const nn::Model& model,
                                           const SlidingWindowOptions& options);

/// Coverage of annotated voxels by per-column greedy view selection, the same
/// selection sliding_window_predict uses.
double column_coverage(const data::Scene& scene, const data::ChunkSpec& chunk,
                       const ViewPolicy& policy);

/// Label image at the view's depth resolution: each valid depth pixel takes
/// the prediction of the voxel just behind its surface point.
std::vector<ClassId> project_labels_to_2d(const PredictionGrid& pred, const geo::View& view,
                                          const geo::WorldToGrid& w2g);

/// Argmax of the encoder's proxy head, at feature resolution.
std::vector<ClassId> predict_2d_labels(const nn::Model& model, const geo::View& view);

/// Majority vote over `views` of the label each voxel of `frame` associates
/// with (ties to the lowest class id); kUnpredicted where no view votes.
/// Label images are at 1/downsample of the view resolution.
std::vector<ClassId> vote_labels(const geo::VoxelFrame& frame,
                                 std::span<const geo::View* const> views,
                                 std::span<const std::vector<ClassId>* const> label_images,
                                 int downsample, double depth_threshold);

/// Non-learned baseline: 2D labels projected onto the whole scene geometry.
PredictionGrid label_backprojection_baseline(const data::Scene& scene,
                                             std::span<const geo::View* const> views,
                                             std::span<const std::vector<ClassId>* const> label_images,
                                             int downsample, double depth_threshold);

/// The k-view 2D baseline at column granularity: each scene column votes over
/// the views greedy selection picks for its chunk, as sliding_window_predict
/// does. `label_images[v]` belongs to scene.views[v].
PredictionGrid column_label_backprojection(const data::Scene& scene, const data::ChunkSpec& chunk,
                                           const ViewPolicy& policy,
                                           std::span<const std::vector<ClassId>> label_images,
                                           int threads = 1);

struct MetricsReport {
  int n_classes = 0;
  std::vector<double> class_accuracy;  ///< NaN for classes absent from the ground truth
  std::vector<std::size_t> class_total;
  double mean_accuracy = 0.0;
  /// confusion[gt][pred], with column n_classes counting unpredicted voxels.
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<std::pair<int, double>> coverage;  ///< (view count, coverage), filled by callers
};

/// Accuracy over annotated ground-truth voxels. Throws when there are none.
MetricsReport evaluate_segmentation(const PredictionGrid& pred, const geo::LabelGrid& gt, int n_classes);

/// Sums confusion matrices and recomputes accuracies.
MetricsReport merge_reports(std::span<const MetricsReport> reports);

std::string report_csv(const MetricsReport& report, const std::vector<std::string>& class_names);

void save_prediction(const std::filesystem::path& path, const PredictionGrid& pred);
PredictionGrid load_prediction(const std::filesystem::path& path);

/// ASCII PLY with one colored vertex per occupied voxel center.
void export_ply(const std::filesystem::path& path, const geo::OccupancyGrid& grid,
                const PredictionGrid& pred);
/// Fixed display color per class; gray for unpredicted.
std::array<std::uint8_t, 3> class_color(ClassId c);

}  // namespace vv::infer
