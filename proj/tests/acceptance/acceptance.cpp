// Acceptance checks: one PASS/FAIL line per criterion.

#include <CLI11.hpp>

#include <Eigen/LU>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "../support/fixtures.hpp"
#include "vv/backprojection/backprojection.hpp"
#include "vv/common/fs.hpp"
#include "vv/experiments/ablation.hpp"
#include "vv/experiments/gradcheck_suite.hpp"
#include "vv/geometry/grids.hpp"
#include "vv/inference/inference.hpp"
#include "vv/tensor/ops.hpp"

namespace vv {
namespace {

using testing::column_accuracy;
using testing::overfit_dataset;
using testing::training_config;
using testing::training_network;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("vv_acceptance_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<Real> flat_params(const nn::Model& model) {
  std::vector<Real> out;
  for (const auto& p : model.parameters()) out.insert(out.end(), p.value.data().begin(), p.value.data().end());
  return out;
}

// ------------------------------------------------------------------ 1

Verdict gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cases = exp::run_gradcheck_suite(1);
  const double dt = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : cases) {
    if (c.max_rel_error >= worst) {
      worst = c.max_rel_error;
      worst_name = c.name;
    }
  }
  return {worst <= 1e-4 && dt < 120.0 && cases.size() == 11,
          fmt("%zu cases, worst %.2e (%s), %.1f s", cases.size(), worst, worst_name.c_str(), dt)};
}

// ------------------------------------------------------------------ 2

// Per-voxel projection written directly from the pinhole model.
std::optional<geo::Pixel> oracle_project(int i, int j, int k, const geo::Mat4& w2g, const geo::View& view,
                                         int ds, double threshold) {
  const Eigen::Vector4d g(i + 0.5, j + 0.5, k + 0.5, 1.0);
  const Eigen::Vector4d world = w2g.inverse() * g;
  const Eigen::Matrix3d r = view.pose.camera_to_world().block<3, 3>(0, 0);
  const geo::Vec3 t = view.pose.camera_to_world().block<3, 1>(0, 3);
  const geo::Vec3 cam = r.transpose() * (world.head<3>() - t);
  if (!(cam.z() > 0)) return std::nullopt;
  const double u = view.intrinsics.fx * (cam.x() / cam.z()) + view.intrinsics.cx;
  const double v = view.intrinsics.fy * (cam.y() / cam.z()) + view.intrinsics.cy;
  if (u < 0 || v < 0 || u >= view.width() || v >= view.height()) return std::nullopt;
  const int px = static_cast<int>(u), py = static_cast<int>(v);
  const double d = view.depth[static_cast<std::size_t>(py) * view.width() + px];
  if (d == 0.0 || std::abs(cam.z() - d) > threshold) return std::nullopt;
  return geo::Pixel{px / ds, py / ds};
}

Verdict projection_oracle() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> extent(1, 8), size(4, 40);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), coin(0.0, 1.0);
  std::size_t checked = 0, mismatches = 0, associated = 0, pruned = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const geo::GridDims dims{extent(rng), extent(rng), extent(rng)};
    const geo::WorldToGrid w2g(0.048, geo::Vec3(unit(rng), unit(rng), unit(rng)) * 0.2);
    const geo::Vec3 center =
        (w2g.grid_to_world() * Eigen::Vector4d(dims.x / 2.0, dims.y / 2.0, dims.z / 2.0, 1.0)).head<3>();
    const geo::Vec3 eye =
        center + geo::Vec3(unit(rng), unit(rng), unit(rng)).normalized() * (0.4 + 0.3 * (unit(rng) + 1));
    const int w = size(rng), h = size(rng);
    geo::View view;
    const double f = w * (0.6 + 0.2 * (unit(rng) + 1));
    view.intrinsics = {f, f, (0.3 + 0.2 * (unit(rng) + 1)) * w, (0.3 + 0.2 * (unit(rng) + 1)) * h, w, h};
    view.pose = geo::Pose::look_at(eye, center, geo::Vec3(unit(rng), unit(rng), unit(rng)));
    view.color.assign(static_cast<std::size_t>(w) * h * 3, 0.5f);
    // A tilted plane through the grid center with holes: voxels fall on both
    // sides of the pruning threshold.
    const double dist = (center - eye).norm();
    const double su = 0.02 * unit(rng), sv = 0.02 * unit(rng);
    view.depth.resize(static_cast<std::size_t>(w) * h);
    for (int py = 0; py < h; ++py) {
      for (int px = 0; px < w; ++px) {
        view.depth[static_cast<std::size_t>(py) * w + px] =
            coin(rng) < 0.1 ? 0.0f : static_cast<float>(dist + su * (px - w / 2.0) + sv * (py - h / 2.0));
      }
    }
    for (const int ds : {1, 4}) {
      const auto map = geo::compute_association_map(geo::VoxelFrame::whole(dims, w2g), view, ds, 0.048);
      for (int i = 0; i < dims.x; ++i) {
        for (int j = 0; j < dims.y; ++j) {
          for (int k = 0; k < dims.z; ++k) {
            const auto want = oracle_project(i, j, k, w2g.matrix(), view, ds, 0.048);
            ++checked;
            mismatches += map.at(dims.index(i, j, k)) != want;
            if (ds != 1) continue;
            if (want) {
              ++associated;
            } else if (oracle_project(i, j, k, w2g.matrix(), view, ds, 1e9)) {
              ++pruned;
            }
          }
        }
      }
    }
  }
  return {mismatches == 0 && associated > 0 && pruned > 0,
          fmt("100 cases, %zu voxel checks, %zu mismatches, %zu associated, %zu depth-pruned", checked,
              mismatches, associated, pruned)};
}

// ------------------------------------------------------------------ 3

Verdict adjointness() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> extent(1, 6), fsize(1, 8);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), coin(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const geo::GridDims dims{extent(rng), extent(rng), extent(rng)};
    const int fw = fsize(rng), fh = fsize(rng), c = 1 + trial % 4;
    geo::AssociationMap map(dims, 1, fw, fh);
    std::uniform_int_distribution<int> u(0, fw - 1), v(0, fh - 1);
    for (std::size_t x = 0; x < dims.count(); ++x) {
      if (coin(rng) < 0.7) map.set(x, geo::Pixel{u(rng), v(rng)});
    }
    Tensor x(Shape{c, fh, fw}), g(Shape{c, dims.x, dims.y, dims.z});
    for (auto& e : x.data()) e = unit(rng);
    for (auto& e : g.data()) e = unit(rng);
    const auto fx = bp::backproject(nullptr, x, map);
    const double lhs = std::inner_product(fx.data().begin(), fx.data().end(), g.data().begin(), 0.0);
    const auto ftg = bp::backproject_adjoint(g, map, fh, fw);
    const double rhs = std::inner_product(x.data().begin(), x.data().end(), ftg.data().begin(), 0.0);
    // The backward pass of the graph op is the same adjoint.
    x.set_requires_grad(true);
    Graph graph;
    const std::vector<Real> gw(g.data().begin(), g.data().end());
    auto loss = ops::weighted_sum(&graph, bp::backproject(&graph, x, map), gw);
    graph.backward(loss);
    const double rhs_graph = std::inner_product(x.data().begin(), x.data().end(), x.grad().begin(), 0.0);
    worst = std::max({worst, std::abs(lhs - rhs), std::abs(lhs - rhs_graph)});
  }
  return {worst <= 1e-10, fmt("50 cases, max |<F x, g> - <x, F^T g>| = %.2e", worst)};
}

// ------------------------------------------------------------------ 4

struct LossSnapshot {
  double loss = 0.0;
  std::vector<Real> grads;
};

Verdict masking() {
  const auto data = overfit_dataset(4);
  const auto cfg = training_network();
  nn::Model model(cfg, 4);
  train::SceneCache cache;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> big(-50.0, 50.0);
  bool identical = true;
  std::size_t masked_rows = 0, masked_pixels = 0;
  for (const auto& sample : data.samples) {
    auto column_labels = sample.column_labels;
    for (std::size_t k = 0; k < column_labels.size(); k += 3) column_labels[k] = kUnannotated;
    // Perturbation deltas are drawn once and shared by both evaluations below.
    std::vector<Tensor> deltas;
    auto run = [&](bool perturb) {
      for (auto& p : model.parameters()) p.value.clear_grad();
      Graph g;
      const auto out = train::forward_sample(&g, model, data.scenes[0], 0, sample, cache, {});
      auto logits = out.column_logits;
      auto proxy_labels = out.proxy_labels;
      for (auto& pl : proxy_labels) {
        for (std::size_t q = 0; q < pl.size(); q += 5) pl[q] = kUnannotated;
      }
      std::vector<Tensor> proxy = out.proxy_logits;
      if (perturb) {
        if (deltas.empty()) {
          Tensor d(logits.shape());
          const int nc = logits.shape()[1];
          for (std::size_t k = 0; k < column_labels.size(); ++k) {
            if (is_annotated(column_labels[k])) continue;
            for (int q = 0; q < nc; ++q) d.data()[k * nc + q] = big(rng);
          }
          deltas.push_back(d);
          for (std::size_t v = 0; v < proxy.size(); ++v) {
            Tensor pd(proxy[v].shape());
            const auto plane = proxy_labels[v].size();
            for (std::size_t p = 0; p < plane; ++p) {
              if (is_annotated(proxy_labels[v][p])) continue;
              for (int q = 0; q < proxy[v].shape()[0]; ++q) pd.data()[q * plane + p] = big(rng);
            }
            deltas.push_back(pd);
          }
        }
        logits = ops::add(&g, logits, deltas[0]);
        for (std::size_t v = 0; v < proxy.size(); ++v) proxy[v] = ops::add(&g, proxy[v], deltas[v + 1]);
      }
      const auto terms = nn::total_loss(&g, logits, column_labels, proxy, proxy_labels, data.class_weights, 1.0);
      LossSnapshot snap;
      if (!terms.total) return snap;
      auto total = *terms.total;
      g.backward(total);
      snap.loss = total.item();
      for (const auto& p : model.parameters()) {
        if (p.value.has_grad()) snap.grads.insert(snap.grads.end(), p.value.grad().begin(), p.value.grad().end());
      }
      return snap;
    };
    const auto base = run(false);
    const auto perturbed = run(true);
    identical = identical && base.loss == perturbed.loss && base.grads == perturbed.grads && !base.grads.empty();
    for (auto l : column_labels) masked_rows += !is_annotated(l);
    const auto out = train::forward_sample(nullptr, model, data.scenes[0], 0, sample, cache, {});
    for (const auto& pl : out.proxy_labels) {
      for (std::size_t q = 0; q < pl.size(); ++q) masked_pixels += q % 5 == 0 || !is_annotated(pl[q]);
    }
  }
  return {identical && masked_rows > 0 && masked_pixels > 0,
          fmt("%zu samples, %zu masked column voxels and %zu masked proxy pixels perturbed; loss and "
              "gradients %s",
              data.samples.size(), masked_rows, masked_pixels, identical ? "bit-identical" : "CHANGED")};
}

// ------------------------------------------------------------------ 5

Verdict sampler_statistics() {
  const auto cfg = testing::tiny_sampler(5);
  std::mt19937_64 rng(5);
  std::vector<std::uint8_t> occ(16, 0);
  std::vector<ClassId> labels(16, kUnannotated);
  occ[0] = 1;
  labels[0] = data::kFloor;
  occ[7] = 1;
  labels[7] = data::kWall;
  int accepted = 0;
  for (int n = 0; n < 10000; ++n) accepted += data::judge_column(occ, labels, cfg, rng) == data::Verdict::Accept;
  const double rate = accepted / 10000.0;

  std::size_t samples = 0, violations = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto spec = testing::tiny_scene();
    spec.unannotated_fraction = 0.3;
    const auto scene = data::generate_scene(100 + seed, spec).scene;
    const auto r = data::sample_chunks(scene, 0, testing::tiny_sampler(seed), 100);
    for (const auto& s : r.samples) {
      ++samples;
      const int ci = s.origin_x + cfg.chunk.center_x(), cj = s.origin_y + cfg.chunk.center_y();
      int geometry = 0, annotated = 0;
      for (int k = 0; k < scene.grid.dims.z; ++k) {
        if (!scene.grid.is_occupied(ci, cj, k)) continue;
        ++geometry;
        annotated += is_annotated(scene.labels.at(ci, cj, k));
      }
      violations += geometry == 0 || annotated < 0.7 * geometry;
    }
  }
  return {std::abs(rate - 0.05) <= 0.01 && violations == 0 && samples == 500,
          fmt("structural-only acceptance %.4f over 10^4 draws; %zu accepted samples, %zu violations", rate,
              samples, violations)};
}

// ------------------------------------------------------------------ 6

Verdict overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = overfit_dataset(16);
  nn::Model model(training_network(), 1);
  train::Trainer trainer(model, data, training_config());
  for (int it = 0; it < 500; ++it) trainer.step(it);
  const double acc = column_accuracy(model, data);
  const double dt = seconds_since(t0);
  return {acc >= 0.95 && dt < 600.0,
          fmt("16 samples, 500 iterations: center-column accuracy %.4f in %.0f s", acc, dt)};
}

// ------------------------------------------------------------------ 7 and 8

struct BenchmarkSettings {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int iterations = 2000;
  int train_scenes = 8;
  int samples_per_scene = 64;
  int test_scenes = 8;
};

exp::BenchmarkSpec benchmark_spec(const BenchmarkSettings& s, std::uint64_t seed) {
  exp::BenchmarkSpec spec;
  spec.scene = testing::tiny_scene();
  spec.scene.camera_height_fraction = 1.0;
  spec.sampler = testing::tiny_sampler(seed);
  spec.sampler.k_views = 5;
  spec.train_scenes = s.train_scenes;
  spec.samples_per_scene = s.samples_per_scene;
  spec.test_scenes = s.test_scenes;
  spec.seed = seed;
  return spec;
}

double twin_accuracy(const infer::MetricsReport& r) {
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < data::kNumClasses; ++c) {
    if (data::is_structural(static_cast<ClassId>(c))) continue;
    const double a = r.class_accuracy[static_cast<std::size_t>(c)];
    if (std::isnan(a)) continue;
    sum += a;
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

struct SeedResults {
  exp::VariantResult geo, fused1, fused5;
  std::vector<std::vector<double>> coverage;  ///< per test scene, for 1, 3, 5 views
};

std::vector<SeedResults> run_benchmarks(const BenchmarkSettings& s, bool need_geo, bool need_five) {
  std::vector<SeedResults> out;
  for (auto seed : s.seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto bench = exp::make_benchmark(benchmark_spec(s, seed));
    exp::RunOptions opts;
    opts.train = training_config(seed);
    opts.train.max_iterations = s.iterations;
    opts.train.eval_every = s.iterations;
    opts.model_seed = seed;
    SeedResults r;
    r.fused1 = exp::run_variant({"fused_1_view", training_network(), 1}, bench, opts);
    if (need_geo) r.geo = exp::run_variant({"geo_only", training_network(nn::InputMode::GeoOnly), 1}, bench, opts);
    if (need_five) r.fused5 = exp::run_variant({"fused_5_views", training_network(), 5}, bench, opts);
    const auto& sc = benchmark_spec(s, seed).sampler;
    for (const auto& scene : bench.test) {
      std::vector<double> cov;
      for (int k : {1, 3, 5}) cov.push_back(infer::column_coverage(scene, sc.chunk, {k, sc.downsample, sc.depth_threshold}));
      r.coverage.push_back(cov);
    }
    std::cerr << fmt("  seed %llu: fused1 %.4f (twins %.4f)", static_cast<unsigned long long>(seed),
                     r.fused1.report.mean_accuracy, twin_accuracy(r.fused1.report));
    if (need_geo) {
      std::cerr << fmt(", geo %.4f (twins %.4f)", r.geo.report.mean_accuracy, twin_accuracy(r.geo.report));
    }
    if (need_five) std::cerr << fmt(", fused5 %.4f", r.fused5.report.mean_accuracy);
    std::cerr << fmt(", %.0f s\n", seconds_since(t0));
    out.push_back(std::move(r));
  }
  return out;
}

Verdict rgb_helps(const std::vector<SeedResults>& runs) {
  double fused = 0, geo = 0, fused_twins = 0, geo_twins = 0;
  bool failed = false;
  for (const auto& r : runs) {
    failed = failed || r.fused1.failed || r.geo.failed;
    fused += r.fused1.report.mean_accuracy / runs.size();
    geo += r.geo.report.mean_accuracy / runs.size();
    fused_twins += twin_accuracy(r.fused1.report) / runs.size();
    geo_twins += twin_accuracy(r.geo.report) / runs.size();
  }
  const double gap = fused - geo;
  return {!failed && gap >= 0.20 && geo_twins <= 0.60 && fused_twins >= 0.90,
          fmt("over %zu seeds: fused 1-view mean %.4f vs geometry-only %.4f (gap %.1f pp); color-twin "
              "classes: geometry-only %.4f, fused %.4f",
              runs.size(), fused, geo, 100 * gap, geo_twins, fused_twins)};
}

Verdict view_count(const std::vector<SeedResults>& runs) {
  bool monotone = true, failed = false;
  std::size_t scenes = 0;
  double one = 0, five = 0;
  for (const auto& r : runs) {
    for (const auto& c : r.coverage) {
      ++scenes;
      monotone = monotone && c[0] <= c[1] && c[1] <= c[2];
    }
    failed = failed || r.fused1.failed || r.fused5.failed;
    one += r.fused1.report.mean_accuracy / runs.size();
    five += r.fused5.report.mean_accuracy / runs.size();
  }
  return {!failed && monotone && five >= one,
          fmt("coverage non-decreasing in 1/3/5 views on %zu/%zu test scenes%s; mean accuracy 5 views "
              "%.4f vs 1 view %.4f over %zu seeds",
              monotone ? scenes : std::size_t{0}, scenes, monotone ? "" : " (VIOLATED)", five, one, runs.size())};
}

// ------------------------------------------------------------------ 9

Verdict fusion_variants() {
  const auto data = overfit_dataset(16);
  std::string detail;
  bool ok = true;
  for (auto fp : {nn::FusionPoint::Begin, nn::FusionPoint::OneThird, nn::FusionPoint::TwoThirds,
                  nn::FusionPoint::End}) {
    const auto net = training_network(nn::InputMode::Fused, fp);
    nn::Model model(net, 9);
    auto cfg = training_config(9);
    cfg.max_iterations = 100;
    cfg.eval_every = 100;
    const auto res = train::train_loop(model, data, cfg, {scratch_dir("fusion_" + nn::to_string(fp)), {}, {}});
    bool finite = res.final_iteration == 100 && res.metrics.size() == 100;
    for (const auto& m : res.metrics) finite = finite && std::isfinite(m.batch_loss) && std::isfinite(m.proxy_loss);
    train::SceneCache cache;
    const auto out = train::forward_sample(nullptr, model, data.scenes[0], 0, data.samples[0], cache, {});
    const bool shape = out.column_logits.shape() == Shape{net.chunk_z, net.n_classes};
    ok = ok && finite && shape;
    detail += fmt("%s%s: %s, last loss %.3f, logits %s", detail.empty() ? "" : "; ", nn::to_string(fp).c_str(),
                  finite ? "finite" : "NON-FINITE", res.metrics.empty() ? NAN : res.metrics.back().batch_loss,
                  shape_string(out.column_logits.shape()).c_str());
  }
  return {ok, detail};
}

// ------------------------------------------------------------------ 10

Verdict sliding_window() {
  auto spec = testing::tiny_scene();
  spec.size_x = 38;
  spec.size_y = 38;
  const auto scene = data::generate_scene(10, spec).scene;

  nn::NetworkConfig net = training_network(nn::InputMode::GeoOnly);
  net.chunk_x = 31;
  net.chunk_y = 31;
  net.widths_3d = {2, 2, 2, 2, 2, 2, 2, 2, 2};
  net.head_hidden = 8;
  const nn::Model model(net, 10);
  infer::SlidingWindowOptions opts;
  opts.views.downsample = 4;
  const auto full = infer::sliding_window_predict(scene, model, opts);
  std::size_t predicted = 0;
  bool once = true;
  for (int w : full.writes) {
    predicted += w > 0;
    once = once && w == 1;
  }
  bool all_voxels = true;
  for (int i = 0; i < 38; ++i) {
    for (int j = 0; j < 38; ++j) {
      for (int k = 0; k < scene.grid.dims.z; ++k) all_voxels = all_voxels && full.grid.at(i, j, k) != kUnpredicted;
    }
  }

  auto fewer = scene;
  fewer.views.resize(2);
  auto none = scene;
  none.views.clear();
  auto moved = scene;
  std::reverse(moved.views.begin(), moved.views.end());
  bool invariant = true;
  for (const auto* s : {&fewer, &none, &moved}) {
    invariant = invariant && infer::sliding_window_predict(*s, model, opts).grid.labels == full.grid.labels;
  }
  return {predicted == 38u * 38u && once && all_voxels && full.writes.size() == 38u * 38u && invariant,
          fmt("%zu of %d columns predicted%s; geometry-only predictions %s under 3 view-set changes", predicted,
              38 * 38, once ? ", each exactly once" : ", SOME REPEATED", invariant ? "bit-identical" : "DIFFER")};
}

// ------------------------------------------------------------------ 11

Verdict determinism() {
  const auto data = overfit_dataset(16);
  auto cfg = training_config(11);
  cfg.max_iterations = 60;
  cfg.eval_every = 20;
  std::string logs[2];
  std::vector<Real> weights[2];
  for (int r = 0; r < 2; ++r) {
    nn::Model model(training_network(), 11);
    const auto res = train::train_loop(model, data, cfg, {scratch_dir("det" + std::to_string(r)), {}, {}});
    for (const auto& m : train::parse_metrics_csv(read_file(res.checkpoint.parent_path() / "metrics.csv"))) {
      logs[r] += fmt("%d,%.17g,%.17g,%.17g\n", m.iteration, m.batch_loss, m.proxy_loss, m.lr);
    }
    weights[r] = flat_params(model);
  }
  const bool same_logs = !logs[0].empty() && logs[0] == logs[1] && weights[0] == weights[1];

  auto half = cfg;
  half.max_iterations = 30;
  const auto dir = scratch_dir("resume");
  nn::Model first(training_network(), 11);
  const auto mid = train::train_loop(first, data, half, {dir, {}, {}});
  nn::Model resumed(training_network(), 999);
  train::train_loop(resumed, data, cfg, {dir, mid.checkpoint, {}});
  const bool same_resume = flat_params(resumed) == weights[0];
  return {same_logs && same_resume,
          fmt("two 60-iteration runs: metrics logs %s; resume at 30: final weights %s",
              same_logs ? "bit-identical" : "DIFFER", same_resume ? "bit-identical" : "DIFFER")};
}

}  // namespace
}  // namespace vv

int main(int argc, char** argv) {
  using namespace vv;
  CLI::App app("Acceptance checks");
  std::vector<int> only;
  BenchmarkSettings bench;
  app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
  app.add_option("--iterations", bench.iterations, "training iterations for criteria 7 and 8");
  app.add_option("--seeds", bench.seeds, "benchmark seeds for criteria 7 and 8")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  const std::set<int> want(only.begin(), only.end());
  auto enabled = [&](int c) { return want.empty() || want.count(c) != 0; };

  int failures = 0;
  auto report = [&](int c, const std::string& title, const Verdict& v) {
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c << " (" << title << "): " << v.detail
              << std::endl;
    failures += !v.pass;
  };
  auto guarded = [&](int c, const std::string& title, const std::function<Verdict()>& fn) {
    if (!enabled(c)) return;
    try {
      report(c, title, fn());
    } catch (const std::exception& e) {
      report(c, title, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, "gradient correctness", gradient_correctness);
  guarded(2, "projection oracle", projection_oracle);
  guarded(3, "adjointness", adjointness);
  guarded(4, "masking", masking);
  guarded(5, "sampler statistics", sampler_statistics);
  guarded(6, "overfit", overfit);
  if (enabled(7) || enabled(8)) {
    std::vector<SeedResults> runs;
    try {
      runs = run_benchmarks(bench, enabled(7), enabled(8));
    } catch (const std::exception& e) {
      std::cerr << "benchmark failed: " << e.what() << '\n';
    }
    guarded(7, "RGB helps", [&] { return runs.empty() ? Verdict{false, "benchmark failed"} : rgb_helps(runs); });
    guarded(8, "view count", [&] { return runs.empty() ? Verdict{false, "benchmark failed"} : view_count(runs); });
  }
  guarded(9, "fusion variants", fusion_variants);
  guarded(10, "sliding window", sliding_window);
  guarded(11, "determinism and resume", determinism);
  return failures == 0 ? 0 : 1;
}
