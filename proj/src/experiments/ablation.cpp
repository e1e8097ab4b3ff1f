#include "vv/experiments/ablation.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "vv/geometry/view_selection.hpp"

namespace vv::exp {

Benchmark make_benchmark(const BenchmarkSpec& spec) {
  Benchmark b;
  std::mt19937_64 rng(spec.seed ^ 0x5bd1e995ULL);
  std::uniform_int_distribution<int> rot(0, 7);
  for (int s = 0; s < spec.train_scenes; ++s) {
    b.train.scenes.push_back(data::generate_scene(spec.seed * 1000 + static_cast<std::uint64_t>(s), spec.scene).scene);
    auto cfg = spec.sampler;
    cfg.seed = spec.sampler.seed * 1000 + static_cast<std::uint64_t>(s);
    auto samples = data::sample_chunks(b.train.scenes.back(), s, cfg,
                                       static_cast<std::size_t>(spec.samples_per_scene)).samples;
    for (auto& sample : samples) {
      if (spec.rotate) {
        sample.rotation = rot(rng);
        data::materialize(b.train.scenes.back(), cfg.chunk, sample);
        sample.view_ids = geo::greedy_view_selection(b.train.scenes.back().views, sample.frame,
                                                     cfg.k_views, cfg.downsample, cfg.depth_threshold)
                              .view_ids;
      }
      b.train.samples.push_back(std::move(sample));
    }
  }
  b.train.class_weights = data::class_histogram_weights(b.train.samples, data::kNumClasses);
  for (int s = 0; s < spec.test_scenes; ++s) {
    b.test.push_back(data::generate_scene(spec.seed * 1000 + 500 + static_cast<std::uint64_t>(s), spec.scene).scene);
  }
  return b;
}

std::vector<Variant> suite_variants(const std::string& suite, const nn::NetworkConfig& base,
                                    int base_k_views) {
  std::vector<Variant> out;
  if (suite == "views") {
    for (int k : {1, 3, 5}) out.push_back({std::to_string(k) + "_views", base, k});
  } else if (suite == "fusion") {
    for (auto fp : {nn::FusionPoint::Begin, nn::FusionPoint::OneThird, nn::FusionPoint::TwoThirds,
                    nn::FusionPoint::End}) {
      auto net = base;
      net.fusion_point = fp;
      out.push_back({"fusion_" + nn::to_string(fp), net, base_k_views});
    }
  } else if (suite == "mode") {
    for (auto m : {nn::InputMode::GeoOnly, nn::InputMode::RgbFeatOnly, nn::InputMode::GeoPlusVoxelColor,
                   nn::InputMode::Fused}) {
      auto net = base;
      net.input_mode = m;
      out.push_back({nn::to_string(m), net, base_k_views});
    }
  } else {
    throw std::invalid_argument("unknown ablation suite '" + suite + "' (views, fusion, mode)");
  }
  return out;
}

VariantResult evaluate_model(const std::string& name, const nn::Model& model,
                             const std::vector<data::Scene>& scenes, int k_views,
                             double depth_threshold, int threads) {
  VariantResult r;
  r.name = name;
  infer::SlidingWindowOptions opts;
  opts.views = {k_views, 1 << model.config().encoder_widths.size(), depth_threshold};
  opts.threads = threads;
  std::vector<infer::MetricsReport> reports;
  std::size_t covered = 0, total = 0;
  for (const auto& scene : scenes) {
    const auto pred = infer::sliding_window_predict(scene, model, opts);
    reports.push_back(infer::evaluate_segmentation(pred.grid, scene.labels, model.config().n_classes));
    covered += pred.covered_annotated;
    total += pred.total_annotated;
  }
  r.report = infer::merge_reports(reports);
  r.coverage = total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total);
  r.report.coverage = {{k_views, r.coverage}};
  return r;
}

VariantResult run_variant(const Variant& variant, const Benchmark& bench, const RunOptions& options) {
  VariantResult failed;
  failed.name = variant.name;
  failed.failed = true;
  try {
    auto data = bench.train;
    for (auto& s : data.samples) {
      if (static_cast<int>(s.view_ids.size()) > variant.k_views) s.view_ids.resize(static_cast<std::size_t>(variant.k_views));
    }
    nn::Model model(variant.net, options.model_seed);
    auto tc = options.train;
    tc.depth_threshold = options.depth_threshold;
    train::Trainer trainer(model, data, tc);
    double loss = 0.0;
    for (int it = 0; it < tc.max_iterations; ++it) {
      const auto step = trainer.step(it);
      if (!std::isfinite(step.batch_loss)) {
        throw std::runtime_error("non-finite loss at iteration " + std::to_string(it));
      }
      loss = step.batch_loss;
      if (options.log && (it + 1) % tc.eval_every == 0) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s: iteration %d loss %.5f", variant.name.c_str(), it + 1, loss);
        options.log(buf);
      }
    }
    auto r = evaluate_model(variant.name, model, bench.test, variant.k_views, options.depth_threshold,
                            options.threads);
    r.final_loss = loss;
    return r;
  } catch (const std::exception& e) {
    failed.error = e.what();
    if (options.log) options.log(variant.name + " FAILED: " + e.what());
    return failed;
  }
}

std::string results_csv(const std::vector<VariantResult>& results) {
  const auto& names = data::class_names();
  std::string out = "variant,status,mean_accuracy";
  for (const auto& n : names) out += ",acc_" + n;
  out += ",coverage\n";
  char buf[64];
  for (const auto& r : results) {
    out += r.name;
    if (r.failed) {
      out += ",FAILED";
      for (std::size_t i = 0; i < names.size() + 2; ++i) out += ",";
      out += "\n";
      continue;
    }
    out += ",ok";
    std::snprintf(buf, sizeof buf, ",%.6f", r.report.mean_accuracy);
    out += buf;
    for (std::size_t c = 0; c < names.size(); ++c) {
      const double a = c < r.report.class_accuracy.size() ? r.report.class_accuracy[c] : NAN;
      if (std::isnan(a)) {
        out += ",nan";
      } else {
        std::snprintf(buf, sizeof buf, ",%.6f", a);
        out += buf;
      }
    }
    std::snprintf(buf, sizeof buf, ",%.6f\n", r.coverage);
    out += buf;
  }
  return out;
}

}  // namespace vv::exp
