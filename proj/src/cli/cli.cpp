#include "vv/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "vv/common/fs.hpp"
#include "vv/datagen/manifest.hpp"
#include "vv/experiments/ablation.hpp"
#include "vv/experiments/gradcheck_suite.hpp"
#include "vv/geometry/io.hpp"
#include "vv/inference/inference.hpp"
#include "vv/training/training.hpp"

namespace vv::cli {
namespace {

namespace fs = std::filesystem;

// Raised for bad flag combinations detected after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  int threads = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key=value config file");
  app->add_option("--set", c.overrides, "override one config key (key=value), repeatable");
  app->add_option("--threads", c.threads, "worker thread cap")->check(CLI::PositiveNumber);
}

class Context {
 public:
  Context(std::string command, const Common& common, std::ostream& out, std::ostream& err)
      : command_(std::move(command)), common_(common), out_(out), err_(err) {}

  std::ostream& out() { return out_; }
  int threads() const { return common_.threads; }
  KeyValueConfig& cfg() { return cfg_; }

  void log(const std::string& msg) { err_ << "[" << command_ << "] " << msg << '\n'; }
  train::Logger logger() {
    return [this](const std::string& m) { log(m); };
  }

  /// Layers: `base` file (if any), --config, then --set overrides.
  void load_config(const fs::path& base = {}) {
    if (!base.empty() && fs::exists(base)) merge(KeyValueConfig::load(base));
    if (!common_.config.empty()) merge(KeyValueConfig::load(common_.config));
    for (const auto& o : common_.overrides) cfg_.apply_override(o);
  }

  void log_config(std::uint64_t seed) {
    std::string dump = cfg_.dump();
    log("seed " + std::to_string(seed));
    log("resolved config:" + std::string(dump.empty() ? " (defaults)" : ""));
    std::istringstream lines(dump);
    for (std::string line; std::getline(lines, line);) log("  " + line);
  }

  void warn_unused() {
    const auto unused = cfg_.unused_keys();
    if (unused.empty()) return;
    std::string keys;
    for (const auto& k : unused) keys += (keys.empty() ? "" : ", ") + k;
    log("warning: config keys not used by this command: " + keys);
  }

 private:
  void merge(const KeyValueConfig& other) {
    for (const auto& [k, v] : other.entries()) cfg_.set(k, v);
  }

  std::string command_;
  const Common& common_;
  std::ostream& out_;
  std::ostream& err_;
  KeyValueConfig cfg_;
};

int feature_downsample(const nn::NetworkConfig& net) { return 1 << net.encoder_widths.size(); }

fs::path network_config_path(const fs::path& checkpoint) {
  return checkpoint.parent_path() / "network.cfg";
}

std::vector<std::string> class_names(int n_classes) {
  std::vector<std::string> names;
  for (int c = 0; c < n_classes; ++c) {
    names.push_back(c < data::kNumClasses ? data::class_names()[static_cast<std::size_t>(c)]
                                          : "class" + std::to_string(c));
  }
  return names;
}

std::unique_ptr<nn::Model> load_model(const fs::path& checkpoint, const nn::NetworkConfig& net) {
  auto model = std::make_unique<nn::Model>(net, 0);
  model->load_state(load_checkpoint(checkpoint));
  return model;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  Common common;
  std::string out;
  int scenes = 1;
  std::uint64_t seed = 0;
};

void cmd_gen(Context& ctx, const GenArgs& a) {
  ctx.load_config();
  const auto spec = data::SceneSpec::from_config(ctx.cfg());
  ctx.log_config(a.seed);
  ctx.warn_unused();
  const fs::path dir(a.out);
  fs::create_directories(dir);
  data::Manifest manifest;
  for (int i = 0; i < a.scenes; ++i) {
    const std::uint64_t scene_seed = a.seed * 1000 + static_cast<std::uint64_t>(i);
    const auto synth = data::generate_scene(scene_seed, spec);
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03d.vvscn", i);
    data::save_scene_bundle(dir / name, synth.scene);
    manifest.scenes.emplace_back(name);
    ctx.log("wrote " + (dir / name).string() + " (seed " + std::to_string(scene_seed) + ", " +
            std::to_string(synth.scene.views.size()) + " views)");
  }
  data::save_manifest(dir / "scenes.manifest", manifest);
  ctx.out() << (dir / "scenes.manifest").string() << '\n';
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
  Common common;
  std::string scenes;
  std::string out;
  int per_scene = 32;
};

void cmd_sample(Context& ctx, const SampleArgs& a) {
  ctx.load_config();
  auto& cfg = ctx.cfg();
  if (!cfg.has("sample.downsample")) {
    cfg.set("sample.downsample", std::to_string(feature_downsample(nn::NetworkConfig::from_config(cfg))));
  }
  const auto base = data::SamplerConfig::from_config(cfg);
  ctx.log_config(base.seed);
  ctx.warn_unused();

  const auto in = data::load_manifest(a.scenes);
  const fs::path out_path(a.out);
  const fs::path out_dir = fs::absolute(out_path).parent_path();
  fs::create_directories(out_dir);
  data::Manifest manifest;
  for (std::size_t s = 0; s < in.scenes.size(); ++s) {
    manifest.scenes.push_back(fs::relative(fs::absolute(in.scenes[s]), out_dir));
    const auto scene = data::load_scene_bundle(in.scenes[s]);
    auto config = base;
    config.seed = base.seed * 1000 + s;
    const auto result = data::sample_chunks(scene, static_cast<int>(s), config,
                                            static_cast<std::size_t>(a.per_scene));
    if (result.cap_reached) {
      ctx.log("warning: scene " + std::to_string(s) + " hit the attempt cap with " +
              std::to_string(result.samples.size()) + " samples");
    }
    for (const auto& smp : result.samples) {
      for (auto& r : data::augment_rotations(scene, smp, config)) manifest.samples.push_back(std::move(r));
    }
    ctx.log("scene " + std::to_string(s) + ": " + std::to_string(result.samples.size()) +
            " centers from " + std::to_string(result.attempts) + " attempts");
  }
  data::save_manifest(out_path, manifest);
  ctx.out() << manifest.samples.size() << " samples written to " << out_path.string() << '\n';
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string data;
  std::string out;
  std::string resume;
};

void cmd_train(Context& ctx, const TrainArgs& a) {
  ctx.load_config();
  auto& cfg = ctx.cfg();
  const auto net = nn::NetworkConfig::from_config(cfg);
  const auto tc = train::TrainConfig::from_config(cfg);
  const auto model_seed =
      static_cast<std::uint64_t>(cfg.get_int("train.model_seed", static_cast<long long>(tc.seed)));
  ctx.log_config(tc.seed);
  ctx.warn_unused();

  const auto manifest = data::load_manifest(a.data);
  const auto data = train::load_dataset(manifest, {net.chunk_x, net.chunk_y, net.chunk_z}, net.n_classes,
                                        ctx.logger());
  ctx.log(std::to_string(data.samples.size()) + " samples from " + std::to_string(data.scenes.size()) +
          " scenes");
  nn::Model model(net, model_seed);
  train::LoopOptions opts;
  opts.out_dir = a.out;
  if (!a.resume.empty()) opts.resume = fs::path(a.resume);
  opts.log = ctx.logger();
  fs::create_directories(opts.out_dir);
  write_file_atomic(network_config_path(opts.out_dir / "checkpoint.vvckpt"), net.to_config().dump());
  const auto result = train::train_loop(model, data, tc, opts);
  ctx.out() << "checkpoint " << result.checkpoint.string() << " at iteration " << result.final_iteration
            << '\n';
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  Common common;
  std::string model;
  std::string scene;
  std::string out;
  int views = 0;
  bool no_pad = false;
};

void cmd_predict(Context& ctx, const PredictArgs& a) {
  ctx.load_config(network_config_path(a.model));
  auto& cfg = ctx.cfg();
  const auto net = nn::NetworkConfig::from_config(cfg);
  infer::SlidingWindowOptions opts;
  opts.views.k_views = a.views > 0 ? a.views : static_cast<int>(cfg.get_int("sample.k_views", 3));
  opts.views.downsample = feature_downsample(net);
  opts.views.depth_threshold = cfg.get_double("sample.depth_threshold", opts.views.depth_threshold);
  opts.pad_boundary = !a.no_pad;
  opts.threads = ctx.threads();
  ctx.log_config(0);
  ctx.warn_unused();

  const auto model = load_model(a.model, net);
  const auto scene = data::load_scene_bundle(a.scene);
  const auto result = infer::sliding_window_predict(scene, *model, opts);
  infer::save_prediction(a.out, result.grid);
  const std::size_t columns = static_cast<std::size_t>(
      std::count_if(result.writes.begin(), result.writes.end(), [](int w) { return w > 0; }));
  ctx.log(std::string("boundary columns ") + (opts.pad_boundary ? "padded with unknown space" : "skipped"));
  ctx.out() << columns << " columns predicted, view coverage "
            << (result.total_annotated == 0
                    ? 0.0
                    : static_cast<double>(result.covered_annotated) / static_cast<double>(result.total_annotated))
            << '\n';
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  std::string pred;
  std::string scene;
  std::string report;
};

void cmd_eval(Context& ctx, const EvalArgs& a) {
  ctx.load_config();
  const int n_classes = static_cast<int>(ctx.cfg().get_int("net.n_classes", data::kNumClasses));
  ctx.log_config(0);
  ctx.warn_unused();
  const auto pred = infer::load_prediction(a.pred);
  const auto volume = geo::load_scene(a.scene);
  const auto report = infer::evaluate_segmentation(pred, volume.labels, n_classes);
  write_file_atomic(a.report, infer::report_csv(report, class_names(n_classes)));
  ctx.out() << "mean_accuracy " << report.mean_accuracy << '\n';
}

// ---------------------------------------------------------------- baseline

struct BaselineArgs {
  Common common;
  std::string model;
  std::string scene;
  std::string out;
  int views = 0;
  bool oracle = false;
};

void cmd_baseline(Context& ctx, const BaselineArgs& a) {
  if (a.model.empty() == !a.oracle) throw UsageError("baseline needs exactly one of --model or --oracle");
  ctx.load_config(a.oracle ? fs::path() : network_config_path(a.model));
  auto& cfg = ctx.cfg();
  const auto net = nn::NetworkConfig::from_config(cfg);
  infer::ViewPolicy policy;
  policy.k_views = a.views > 0 ? a.views : static_cast<int>(cfg.get_int("sample.k_views", 3));
  policy.downsample = feature_downsample(net);
  policy.depth_threshold = cfg.get_double("sample.depth_threshold", policy.depth_threshold);
  ctx.log_config(0);
  ctx.warn_unused();

  const auto scene = data::load_scene_bundle(a.scene);
  std::vector<std::vector<ClassId>> images;
  if (a.oracle) {
    ctx.log("2D labels from ground truth");
    for (const auto& v : scene.views) {
      images.push_back(data::proxy_labels(v, scene.labels, scene.grid.world_to_grid, policy.downsample));
    }
  } else {
    const auto model = load_model(a.model, net);
    for (const auto& v : scene.views) images.push_back(infer::predict_2d_labels(*model, v));
  }
  const auto pred = infer::column_label_backprojection(
      scene, {net.chunk_x, net.chunk_y, net.chunk_z}, policy, images, ctx.threads());
  infer::save_prediction(a.out, pred);
  const auto labeled = std::count_if(pred.labels.begin(), pred.labels.end(),
                                     [](ClassId c) { return c != kUnpredicted; });
  ctx.out() << labeled << " voxels labeled from " << policy.k_views << " views per column\n";
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  Common common;
  std::string suite;
  std::string out;
};

void cmd_ablate(Context& ctx, const AblateArgs& a) {
  ctx.load_config();
  auto& cfg = ctx.cfg();
  const auto net = nn::NetworkConfig::from_config(cfg);
  exp::BenchmarkSpec spec;
  spec.scene = data::SceneSpec::from_config(cfg);
  if (!cfg.has("sample.downsample")) cfg.set("sample.downsample", std::to_string(feature_downsample(net)));
  spec.sampler = data::SamplerConfig::from_config(cfg);
  spec.train_scenes = static_cast<int>(cfg.get_int("bench.train_scenes", spec.train_scenes));
  spec.samples_per_scene = static_cast<int>(cfg.get_int("bench.samples_per_scene", spec.samples_per_scene));
  spec.test_scenes = static_cast<int>(cfg.get_int("bench.test_scenes", spec.test_scenes));
  spec.rotate = cfg.get_bool("bench.rotate", spec.rotate);
  spec.seed = static_cast<std::uint64_t>(cfg.get_int("bench.seed", 0));
  exp::RunOptions run;
  run.train = train::TrainConfig::from_config(cfg);
  run.model_seed = static_cast<std::uint64_t>(
      cfg.get_int("train.model_seed", static_cast<long long>(run.train.seed)));
  run.threads = ctx.threads();
  run.depth_threshold = spec.sampler.depth_threshold;
  run.log = ctx.logger();
  const auto variants = exp::suite_variants(a.suite, net, spec.sampler.k_views);
  for (const auto& v : variants) spec.sampler.k_views = std::max(spec.sampler.k_views, v.k_views);
  ctx.log_config(spec.seed);
  ctx.warn_unused();

  const auto bench = exp::make_benchmark(spec);
  ctx.log("benchmark: " + std::to_string(bench.train.samples.size()) + " training samples, " +
          std::to_string(bench.test.size()) + " test scenes");
  std::vector<exp::VariantResult> results;
  for (const auto& v : variants) {
    ctx.log("variant " + v.name);
    results.push_back(exp::run_variant(v, bench, run));
    if (results.back().failed) ctx.log("variant " + v.name + " FAILED: " + results.back().error);
  }
  const fs::path dir(a.out);
  fs::create_directories(dir);
  const auto csv = exp::results_csv(results);
  write_file_atomic(dir / (a.suite + ".csv"), csv);
  ctx.out() << csv;
}

// ---------------------------------------------------------------- export-ply

struct PlyArgs {
  Common common;
  std::string scene;
  std::string pred;
  std::string out;
};

void cmd_export_ply(Context& ctx, const PlyArgs& a) {
  ctx.load_config();
  ctx.log_config(0);
  ctx.warn_unused();
  const auto volume = geo::load_scene(a.scene);
  const auto pred = infer::load_prediction(a.pred);
  infer::export_ply(a.out, volume.grid, pred);
  ctx.out() << "wrote " << a.out << '\n';
}

// ---------------------------------------------------------------- gradcheck

struct GradArgs {
  Common common;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
};

void cmd_gradcheck(Context& ctx, const GradArgs& a) {
  ctx.load_config();
  ctx.log_config(a.seed);
  ctx.warn_unused();
  const auto cases = exp::run_gradcheck_suite(a.seed);
  bool ok = true;
  ctx.out() << "case,max_rel_error,coordinates,seconds\n";
  for (const auto& c : cases) {
    char line[160];
    std::snprintf(line, sizeof line, "%s,%.3e,%zu,%.3f\n", c.name.c_str(), c.max_rel_error, c.coordinates,
                  c.seconds);
    ctx.out() << line;
    ok = ok && c.max_rel_error <= a.tolerance;
  }
  if (!ok) throw std::runtime_error("gradient check exceeded tolerance");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Volumetric semantic segmentation from RGB-D views", "vvseg");
  app.require_subcommand(1);
  app.fallthrough(false);

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "generate synthetic scenes and a scene manifest");
  add_common(c_gen, gen.common);
  c_gen->add_option("--out", gen.out, "output directory")->required();
  c_gen->add_option("--scenes", gen.scenes, "number of scenes")->check(CLI::PositiveNumber);
  c_gen->add_option("--seed", gen.seed, "scene i uses seed*1000+i");

  SampleArgs smp;
  auto* c_sample = app.add_subcommand("sample", "draw training chunks from scenes");
  add_common(c_sample, smp.common);
  c_sample->add_option("--scenes", smp.scenes, "scene manifest")->required();
  c_sample->add_option("--out", smp.out, "output sample manifest")->required();
  c_sample->add_option("--per-scene", smp.per_scene, "chunk centers per scene")->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train a model on a sample manifest");
  add_common(c_train, tr.common);
  c_train->add_option("--data", tr.data, "sample manifest")->required();
  c_train->add_option("--out", tr.out, "output directory")->required();
  c_train->add_option("--resume", tr.resume, "checkpoint to resume from");

  PredictArgs pr;
  auto* c_predict = app.add_subcommand("predict", "sliding-window prediction of a scene");
  add_common(c_predict, pr.common);
  c_predict->add_option("--model", pr.model, "checkpoint (network.cfg is read from its directory)")
      ->required();
  c_predict->add_option("--scene", pr.scene, "scene file")->required();
  c_predict->add_option("--out", pr.out, "prediction file")->required();
  c_predict->add_option("--views", pr.views, "views per column (default sample.k_views)");
  c_predict->add_flag("--no-pad", pr.no_pad, "skip columns whose chunk leaves the scene");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "per-class voxel accuracy of a prediction");
  add_common(c_eval, ev.common);
  c_eval->add_option("--pred", ev.pred, "prediction file")->required();
  c_eval->add_option("--scene", ev.scene, "scene file with ground truth")->required();
  c_eval->add_option("--report", ev.report, "output CSV")->required();

  BaselineArgs bl;
  auto* c_base = app.add_subcommand("baseline", "project 2D labels onto the scene geometry");
  add_common(c_base, bl.common);
  c_base->add_option("--model", bl.model, "checkpoint whose 2D head labels the images");
  c_base->add_flag("--oracle", bl.oracle, "use ground-truth 2D labels instead of a model");
  c_base->add_option("--scene", bl.scene, "scene file")->required();
  c_base->add_option("--out", bl.out, "prediction file")->required();
  c_base->add_option("--views", bl.views, "views per column (default sample.k_views)");

  AblateArgs ab;
  auto* c_ablate = app.add_subcommand("ablate", "train and evaluate a suite of variants");
  add_common(c_ablate, ab.common);
  c_ablate->add_option("--suite", ab.suite, "views, fusion or mode")
      ->required()
      ->check(CLI::IsMember({"views", "fusion", "mode"}));
  c_ablate->add_option("--out", ab.out, "output directory")->required();

  PlyArgs ply;
  auto* c_ply = app.add_subcommand("export-ply", "write predicted voxels as a colored point cloud");
  add_common(c_ply, ply.common);
  c_ply->add_option("--scene", ply.scene, "scene file")->required();
  c_ply->add_option("--pred", ply.pred, "prediction file")->required();
  c_ply->add_option("--out", ply.out, "output PLY")->required();

  GradArgs gc;
  auto* c_grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  add_common(c_grad, gc.common);
  c_grad->add_option("--seed", gc.seed, "random seed");
  c_grad->add_option("--tolerance", gc.tolerance, "maximum relative error");

  const auto usage = [&](const CLI::App* which, std::ostream& os) {
    os << (which ? which : &app)->help();
  };

  if (!args.empty() && !args.front().empty() && args.front()[0] != '-' &&
      app.get_subcommand_no_throw(args.front()) == nullptr) {
    err << "error: unknown subcommand '" << args.front() << "'\n\n";
    usage(nullptr, err);
    return kExitUsage;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const CLI::App* which = nullptr;
    for (auto* sub : app.get_subcommands()) which = sub;
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      usage(which, out);
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n";
    usage(which, err);
    return kExitUsage;
  }

  auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  const std::map<std::string, const Common*> commons{
      {"gen", &gen.common},     {"sample", &smp.common},   {"train", &tr.common},
      {"predict", &pr.common},  {"eval", &ev.common},      {"baseline", &bl.common},
      {"ablate", &ab.common},   {"export-ply", &ply.common}, {"gradcheck", &gc.common}};
  Context ctx(name, *commons.at(name), out, err);
  try {
    if (name == "gen") cmd_gen(ctx, gen);
    else if (name == "sample") cmd_sample(ctx, smp);
    else if (name == "train") cmd_train(ctx, tr);
    else if (name == "predict") cmd_predict(ctx, pr);
    else if (name == "eval") cmd_eval(ctx, ev);
    else if (name == "baseline") cmd_baseline(ctx, bl);
    else if (name == "ablate") cmd_ablate(ctx, ab);
    else if (name == "export-ply") cmd_export_ply(ctx, ply);
    else cmd_gradcheck(ctx, gc);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n";
    usage(sub, err);
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace vv::cli
