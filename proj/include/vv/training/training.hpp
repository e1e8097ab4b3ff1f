#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vv/datagen/manifest.hpp"
#include "vv/training/pipeline.hpp"

namespace vv::train {

struct TrainConfig {
  double lr = 0.001;
  double momentum = 0.9;
  int batch_size = 8;
  int max_iterations = 1000;
  int eval_every = 100;  ///< checkpoint and metrics cadence
  std::uint64_t seed = 0;
  double proxy_weight = 1.0;
  bool end_to_end = true;  ///< false freezes the 2D encoder
  double depth_threshold = 0.048;

  void validate() const;
  /// Reads the `train.*` keys; unset keys keep their defaults.
  static TrainConfig from_config(const KeyValueConfig& cfg);
};

/// Scenes plus materialized samples, indexed by Sample::scene.
struct Dataset {
  std::vector<data::Scene> scenes;
  std::vector<data::Sample> samples;
  std::vector<double> class_weights;
};

using Logger = std::function<void(const std::string&)>;

/// Loads every scene of the manifest, skipping unreadable ones (and their
/// samples) with a log line; throws if nothing usable remains. Class weights
/// come from the column labels of the loaded samples.
Dataset load_dataset(const data::Manifest& manifest, const data::ChunkSpec& chunk, int n_classes,
                     const Logger& log = {});

struct StepResult {
  bool skipped = false;     ///< every sample was fully masked
  double batch_loss = 0.0;  ///< mean over samples with a loss
  double proxy_loss = 0.0;  ///< mean proxy term over the same samples
  int contributing = 0;
};

class Trainer {
 public:
  Trainer(nn::Model& model, const Dataset& data, TrainConfig config);

  /// Sample indices of the batch for `iteration`: consecutive slices of a
  /// per-epoch seeded shuffle, so any iteration can be replayed directly.
  std::vector<std::size_t> batch_indices(int iteration) const;

  /// Mean-reduced gradient over the batch, then one momentum SGD step on the
  /// trainable parameters.
  StepResult step(int iteration);
  StepResult step_on(const std::vector<std::size_t>& batch, int iteration);

  /// Parameters the optimizer updates (all but the encoder when frozen).
  std::vector<Parameter*> trainable() const;

 private:
  nn::Model& model_;
  const Dataset& data_;
  TrainConfig config_;
  mutable SceneCache cache_;
};

struct MetricsRow {
  int iteration = 0;
  double batch_loss = 0.0;
  double proxy_loss = 0.0;
  double lr = 0.0;
  double wall_clock_s = 0.0;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);

/// Parameters, momentum buffers ("velocity/<name>") and "meta/iteration".
std::vector<NamedTensor> training_state(const nn::Model& model, int iteration);
/// Restores a training_state; returns the stored iteration.
int restore_training_state(nn::Model& model, std::span<const NamedTensor> state);

struct LoopOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  Logger log;
};

struct LoopResult {
  int final_iteration = 0;
  std::vector<MetricsRow> metrics;
  std::filesystem::path checkpoint;
};

/// Trains `model` from its current weights (or the resume checkpoint) up to
/// config.max_iterations. Writes <out>/checkpoint.vvckpt, <out>/metrics.csv and
/// <out>/class_weights.txt every eval_every iterations and at the end.
LoopResult train_loop(nn::Model& model, const Dataset& data, const TrainConfig& config,
                      const LoopOptions& options);

}  // namespace vv::train
