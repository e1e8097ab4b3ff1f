#pragma once

#include <string>
#include <vector>

#include "vv/inference/inference.hpp"
#include "vv/training/training.hpp"

namespace vv::exp {

/// Training samples plus held-out scenes.
struct Benchmark {
  train::Dataset train;
  std::vector<data::Scene> test;
};

struct BenchmarkSpec {
  data::SceneSpec scene;
  data::SamplerConfig sampler;  ///< k_views is the largest view count any variant uses
  int train_scenes = 4;
  int samples_per_scene = 32;
  int test_scenes = 2;
  bool rotate = true;  ///< give each sample a random rotation from the 45-degree grid
  std::uint64_t seed = 0;
};

/// Deterministic in the spec. Train scenes use seeds seed*1000 + i, test
/// scenes seed*1000 + 500 + i.
Benchmark make_benchmark(const BenchmarkSpec& spec);

struct Variant {
  std::string name;
  nn::NetworkConfig net;
  int k_views = 3;
};

/// Variants of a named suite: "views" (1, 3, 5), "fusion" (begin, 1/3, 2/3,
/// end) or "mode" (geo_only, rgb_feat_only, geo_voxel_color, fused). Throws
/// std::invalid_argument for other names.
std::vector<Variant> suite_variants(const std::string& suite, const nn::NetworkConfig& base,
                                    int base_k_views);

struct VariantResult {
  std::string name;
  bool failed = false;
  std::string error;
  infer::MetricsReport report;
  double coverage = 0.0;
  double final_loss = 0.0;
};

struct RunOptions {
  train::TrainConfig train;
  std::uint64_t model_seed = 0;
  int threads = 1;
  double depth_threshold = 0.048;
  train::Logger log;
};

/// Trains one variant on the benchmark (training samples keep only their
/// first k greedy views) and evaluates it by sliding-window prediction on the
/// test scenes. Exceptions and non-finite losses produce a failed result.
VariantResult run_variant(const Variant& variant, const Benchmark& bench, const RunOptions& options);

/// Evaluates a trained model on the test scenes.
VariantResult evaluate_model(const std::string& name, const nn::Model& model,
                             const std::vector<data::Scene>& scenes, int k_views,
                             double depth_threshold, int threads);

/// One row per variant: name, status, mean accuracy, per-class accuracies,
/// coverage.
std::string results_csv(const std::vector<VariantResult>& results);

}  // namespace vv::exp
