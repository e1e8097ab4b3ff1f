#include "vv/training/training.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "vv/common/fs.hpp"

namespace vv::train {
namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void log_line(const Logger& log, const std::string& s) {
  if (log) log(s);
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
  if (!(lr > 0.0)) fail("lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (max_iterations < 0) fail("max_iterations must be non-negative");
  if (eval_every < 1) fail("eval_every must be at least 1");
  if (!(proxy_weight >= 0.0)) fail("proxy_weight must be non-negative");
  if (!(depth_threshold > 0.0)) fail("depth_threshold must be positive");
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& cfg) {
  TrainConfig c;
  c.lr = cfg.get_double("train.lr", c.lr);
  c.momentum = cfg.get_double("train.momentum", c.momentum);
  c.batch_size = static_cast<int>(cfg.get_int("train.batch_size", c.batch_size));
  c.max_iterations = static_cast<int>(cfg.get_int("train.max_iterations", c.max_iterations));
  c.eval_every = static_cast<int>(cfg.get_int("train.eval_every", c.eval_every));
  c.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", static_cast<long long>(c.seed)));
  c.proxy_weight = cfg.get_double("train.proxy_weight", c.proxy_weight);
  c.end_to_end = cfg.get_bool("train.end_to_end", c.end_to_end);
  c.depth_threshold = cfg.get_double("train.depth_threshold", c.depth_threshold);
  c.validate();
  return c;
}

Dataset load_dataset(const data::Manifest& manifest, const data::ChunkSpec& chunk, int n_classes,
                     const Logger& log) {
  Dataset d;
  std::vector<int> remap(manifest.scenes.size(), -1);
  for (std::size_t i = 0; i < manifest.scenes.size(); ++i) {
    try {
      d.scenes.push_back(data::load_scene_bundle(manifest.scenes[i]));
      remap[i] = static_cast<int>(d.scenes.size() - 1);
    } catch (const std::exception& e) {
      log_line(log, "skipping scene " + manifest.scenes[i].string() + ": " + e.what());
    }
  }
  std::size_t dropped = 0;
  for (auto s : manifest.samples) {
    const int scene = remap[static_cast<std::size_t>(s.scene)];
    if (scene < 0) {
      ++dropped;
      continue;
    }
    s.scene = scene;
    data::materialize(d.scenes[static_cast<std::size_t>(scene)], chunk, s);
    d.samples.push_back(std::move(s));
  }
  if (dropped > 0) log_line(log, "skipped " + std::to_string(dropped) + " samples of unreadable scenes");
  if (d.samples.empty()) throw std::runtime_error("dataset has no usable samples");
  d.class_weights = data::class_histogram_weights(d.samples, n_classes);
  return d;
}

Trainer::Trainer(nn::Model& model, const Dataset& data, TrainConfig config)
    : model_(model), data_(data), config_(config) {
  config_.validate();
  if (data_.samples.empty()) throw std::invalid_argument("Trainer: empty dataset");
  if (static_cast<int>(data_.class_weights.size()) != model_.config().n_classes) {
    throw std::invalid_argument("Trainer: class weight count does not match n_classes");
  }
  for (auto& p : model_.parameters()) {
    p.value.set_requires_grad(config_.end_to_end || !nn::Model::is_encoder_parameter(p.name));
  }
}

std::vector<std::size_t> Trainer::batch_indices(int iteration) const {
  const std::size_t n = data_.samples.size();
  std::vector<std::size_t> out;
  std::uint64_t cached_epoch = ~0ULL;
  std::vector<std::size_t> perm(n);
  for (int b = 0; b < config_.batch_size; ++b) {
    const auto pos = static_cast<std::uint64_t>(iteration) * config_.batch_size + b;
    const std::uint64_t epoch = pos / n;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::mt19937_64 rng(mix(config_.seed, epoch));
      std::shuffle(perm.begin(), perm.end(), rng);
      cached_epoch = epoch;
    }
    out.push_back(perm[pos % n]);
  }
  return out;
}

std::vector<Parameter*> Trainer::trainable() const {
  std::vector<Parameter*> out;
  for (auto& p : model_.parameters()) {
    if (config_.end_to_end || !nn::Model::is_encoder_parameter(p.name)) out.push_back(&p);
  }
  return out;
}

StepResult Trainer::step(int iteration) { return step_on(batch_indices(iteration), iteration); }

StepResult Trainer::step_on(const std::vector<std::size_t>& batch, int iteration) {
  StepResult result;
  const auto params = trainable();
  for (auto* p : params) p->value.clear_grad();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& sample = data_.samples.at(batch[b]);
    PipelineOptions opts;
    opts.depth_threshold = config_.depth_threshold;
    opts.forward = {true, mix(mix(config_.seed, static_cast<std::uint64_t>(iteration)), b)};
    Graph graph;
    const auto out = forward_sample(&graph, model_, data_.scenes.at(static_cast<std::size_t>(sample.scene)),
                                    sample.scene, sample, cache_, opts);
    auto terms = nn::total_loss(&graph, out.column_logits, sample.column_labels, out.proxy_logits,
                                out.proxy_labels, data_.class_weights, config_.proxy_weight);
    if (!terms.total) continue;
    ++result.contributing;
    result.batch_loss += terms.total->item();
    result.proxy_loss += terms.proxy;
    if (terms.total->requires_grad()) graph.backward(*terms.total);
  }
  if (result.contributing == 0) {
    result.skipped = true;
    for (auto* p : params) p->value.clear_grad();
    return result;
  }
  const double inv = 1.0 / result.contributing;
  result.batch_loss *= inv;
  result.proxy_loss *= inv;
  for (auto* p : params) {
    for (auto& g : p->value.ensure_grad()) g *= inv;
  }
  sgd_momentum_step(params, config_.lr, config_.momentum);
  return result;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "iteration,batch_loss,proxy_loss,lr,wall_clock_s\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.3f\n", r.iteration, r.batch_loss,
                  r.proxy_loss, r.lr, r.wall_clock_s);
    out += buf;
  }
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::vector<MetricsRow> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &r.iteration, &r.batch_loss, &r.proxy_loss,
                    &r.lr, &r.wall_clock_s) != 5) {
      throw std::runtime_error("malformed metrics row: " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<NamedTensor> training_state(const nn::Model& model, int iteration) {
  auto state = model.state();
  for (const auto& p : model.parameters()) {
    Tensor v(p.value.shape());
    std::copy(p.velocity.begin(), p.velocity.end(), v.data().begin());
    state.push_back({"velocity/" + p.name, v});
  }
  state.push_back({"meta/iteration", Tensor::scalar(iteration)});
  return state;
}

int restore_training_state(nn::Model& model, std::span<const NamedTensor> state) {
  model.load_state(state);
  int iteration = -1;
  for (const auto& t : state) {
    if (t.name == "meta/iteration") iteration = static_cast<int>(t.value.item());
  }
  if (iteration < 0) throw std::runtime_error("checkpoint lacks meta/iteration");
  for (auto& p : model.parameters()) {
    const auto it = std::find_if(state.begin(), state.end(),
                                 [&](const NamedTensor& t) { return t.name == "velocity/" + p.name; });
    if (it == state.end()) throw std::runtime_error("checkpoint lacks velocity/" + p.name);
    p.velocity.assign(it->value.data().begin(), it->value.data().end());
  }
  return iteration;
}

LoopResult train_loop(nn::Model& model, const Dataset& data, const TrainConfig& config,
                      const LoopOptions& options) {
  config.validate();
  LoopResult result;
  std::filesystem::create_directories(options.out_dir);
  result.checkpoint = options.out_dir / "checkpoint.vvckpt";
  const auto metrics_path = options.out_dir / "metrics.csv";

  int start = 0;
  if (options.resume) {
    start = restore_training_state(model, load_checkpoint(*options.resume));
    if (std::filesystem::exists(metrics_path)) {
      for (const auto& r : parse_metrics_csv(read_file(metrics_path))) {
        if (r.iteration < start) result.metrics.push_back(r);
      }
    }
    log_line(options.log, "resumed at iteration " + std::to_string(start));
  }

  {
    std::ostringstream w;
    for (std::size_t c = 0; c < data.class_weights.size(); ++c) {
      w << c << ' ' << data.class_weights[c] << '\n';
    }
    write_file_atomic(options.out_dir / "class_weights.txt", w.str());
    log_line(options.log, "class weights:\n" + w.str());
  }

  Trainer trainer(model, data, config);
  const auto t0 = std::chrono::steady_clock::now();
  auto persist = [&](int next_iteration) {
    save_checkpoint(result.checkpoint, training_state(model, next_iteration));
    write_file_atomic(metrics_path, metrics_csv(result.metrics));
  };
  for (int it = start; it < config.max_iterations; ++it) {
    const auto step = trainer.step(it);
    if (step.skipped) log_line(options.log, "iteration " + std::to_string(it) + ": all samples masked, step skipped");
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.metrics.push_back({it, step.batch_loss, step.proxy_loss, config.lr, elapsed});
    if ((it + 1) % config.eval_every == 0) {
      persist(it + 1);
      char buf[128];
      std::snprintf(buf, sizeof buf, "iteration %d loss %.5f proxy %.5f", it + 1, step.batch_loss,
                    step.proxy_loss);
      log_line(options.log, buf);
    }
  }
  persist(std::max(start, config.max_iterations));
  result.final_iteration = std::max(start, config.max_iterations);
  return result;
}

}  // namespace vv::train
