#include "vv/datagen/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vv/geometry/view_selection.hpp"

namespace vv::data {
namespace {

// Chunk coordinates -> scene grid coordinates.
geo::Mat4 chunk_to_scene(const ChunkSpec& chunk, int ox, int oy, double angle) {
  const geo::Vec3 pivot(chunk.center_x() + 0.5, chunk.center_y() + 0.5, 0.0);
  geo::Mat4 m = geo::Mat4::Identity();
  m.block<3, 3>(0, 0) = Eigen::AngleAxisd(angle, geo::Vec3::UnitZ()).toRotationMatrix();
  m.block<3, 1>(0, 3) = geo::Vec3(ox, oy, 0) + pivot - m.block<3, 3>(0, 0) * pivot;
  return m;
}

double rotation_angle(int rotation, int rotations) {
  return 2.0 * std::numbers::pi * rotation / rotations;
}

}  // namespace

void SamplerConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("sampler config: " + m); };
  if (chunk.x < 1 || chunk.y < 1 || chunk.z < 1) fail("chunk extents must be positive");
  if (!(structural_discard_prob >= 0.0 && structural_discard_prob <= 1.0)) {
    fail("structural_discard_prob must lie in [0, 1]");
  }
  if (!(min_annotated_fraction >= 0.0 && min_annotated_fraction <= 1.0)) {
    fail("min_annotated_fraction must lie in [0, 1]");
  }
  if (k_views < 1) fail("k_views must be at least 1");
  if (rotations < 1) fail("rotations must be at least 1");
  if (downsample < 1) fail("downsample must be at least 1");
  if (!(depth_threshold > 0.0)) fail("depth_threshold must be positive");
}

SamplerConfig SamplerConfig::from_config(const KeyValueConfig& cfg) {
  SamplerConfig s;
  s.chunk.x = static_cast<int>(cfg.get_int("net.chunk_x", s.chunk.x));
  s.chunk.y = static_cast<int>(cfg.get_int("net.chunk_y", s.chunk.y));
  s.chunk.z = static_cast<int>(cfg.get_int("net.chunk_z", s.chunk.z));
  std::vector<int> structural(s.structural_class_ids.begin(), s.structural_class_ids.end());
  structural = cfg.get_int_list("sample.structural_classes", structural);
  s.structural_class_ids.assign(structural.begin(), structural.end());
  s.structural_discard_prob = cfg.get_double("sample.structural_discard_prob", s.structural_discard_prob);
  s.min_annotated_fraction = cfg.get_double("sample.min_annotated_fraction", s.min_annotated_fraction);
  s.k_views = static_cast<int>(cfg.get_int("sample.k_views", s.k_views));
  s.rotations = static_cast<int>(cfg.get_int("sample.rotations", s.rotations));
  s.downsample = static_cast<int>(cfg.get_int("sample.downsample", s.downsample));
  s.depth_threshold = cfg.get_double("sample.depth_threshold", s.depth_threshold);
  s.seed = static_cast<std::uint64_t>(cfg.get_int("sample.seed", static_cast<long long>(s.seed)));
  s.validate();
  return s;
}

geo::VoxelFrame chunk_frame(const geo::OccupancyGrid& grid, const ChunkSpec& chunk, int ox, int oy,
                            int rotation) {
  geo::VoxelFrame f;
  f.dims = chunk.dims();
  f.grid_to_world = grid.world_to_grid.grid_to_world() *
                    chunk_to_scene(chunk, ox, oy, rotation_angle(rotation, 8));
  return f;
}

void materialize(const Scene& scene, const ChunkSpec& chunk, Sample& sample) {
  const auto m = chunk_to_scene(chunk, sample.origin_x, sample.origin_y,
                                rotation_angle(sample.rotation, 8));
  sample.frame.dims = chunk.dims();
  sample.frame.grid_to_world = scene.grid.world_to_grid.grid_to_world() * m;
  const auto& sd = scene.grid.dims;
  const auto cd = chunk.dims();
  sample.occupied.assign(cd.count(), 0);
  sample.known.assign(cd.count(), 0);
  sample.column_labels.assign(static_cast<std::size_t>(chunk.z), kUnannotated);
  for (int i = 0; i < cd.x; ++i) {
    for (int j = 0; j < cd.y; ++j) {
      const geo::Vec3 p = m.block<3, 3>(0, 0) * geo::Vec3(i + 0.5, j + 0.5, 0.0) +
                          m.block<3, 1>(0, 3);
      const int si = static_cast<int>(std::floor(p.x())), sj = static_cast<int>(std::floor(p.y()));
      const bool column = i == chunk.center_x() && j == chunk.center_y();
      for (int k = 0; k < cd.z; ++k) {
        if (!sd.contains(si, sj, k)) continue;
        const auto s = sd.index(si, sj, k);
        const auto c = cd.index(i, j, k);
        sample.occupied[c] = scene.grid.occupied[s];
        sample.known[c] = scene.grid.known[s];
        if (column) sample.column_labels[static_cast<std::size_t>(k)] = scene.labels.labels[s];
      }
    }
  }
}

Verdict judge_column(std::span<const std::uint8_t> occupied, std::span<const ClassId> labels,
                     const SamplerConfig& config, std::mt19937_64& rng) {
  std::size_t geometry = 0, annotated = 0;
  bool structural_only = true;
  for (std::size_t k = 0; k < occupied.size(); ++k) {
    if (!occupied[k]) continue;
    ++geometry;
    if (!is_annotated(labels[k])) continue;
    ++annotated;
    const auto& s = config.structural_class_ids;
    if (std::find(s.begin(), s.end(), labels[k]) == s.end()) structural_only = false;
  }
  if (geometry == 0) return Verdict::EmptyColumn;
  if (static_cast<double>(annotated) < config.min_annotated_fraction * static_cast<double>(geometry)) {
    return Verdict::TooFewAnnotated;
  }
  if (structural_only) {
    std::bernoulli_distribution discard(config.structural_discard_prob);
    if (discard(rng)) return Verdict::StructuralDiscard;
  }
  return Verdict::Accept;
}

SamplingResult sample_chunks(const Scene& scene, int scene_index, const SamplerConfig& config,
                             std::size_t n_wanted) {
  config.validate();
  const auto& sd = scene.grid.dims;
  const auto& chunk = config.chunk;
  if (scene.labels.annotated_count() == 0) {
    throw std::invalid_argument("sample_chunks: scene has no annotated voxels");
  }
  SamplingResult result;
  std::mt19937_64 rng(config.seed);
  // Any scene column can be the center; chunk parts past the walls are
  // padded as unknown, as in sliding-window inference.
  std::uniform_int_distribution<int> ux(0, sd.x - 1), uy(0, sd.y - 1);
  const std::size_t cap = 1000 * n_wanted;
  std::vector<std::uint8_t> column_occ(static_cast<std::size_t>(chunk.z));
  std::vector<ClassId> column_labels(static_cast<std::size_t>(chunk.z));
  while (result.samples.size() < n_wanted) {
    if (result.attempts >= cap) {
      result.cap_reached = true;
      break;
    }
    ++result.attempts;
    const int ci = ux(rng), cj = uy(rng);
    const int ox = ci - chunk.center_x(), oy = cj - chunk.center_y();
    for (int k = 0; k < chunk.z; ++k) {
      const bool inside = k < sd.z;
      column_occ[static_cast<std::size_t>(k)] = inside ? scene.grid.is_occupied(ci, cj, k) : 0;
      column_labels[static_cast<std::size_t>(k)] = inside ? scene.labels.at(ci, cj, k) : kUnannotated;
    }
    if (judge_column(column_occ, column_labels, config, rng) != Verdict::Accept) continue;

    Sample s;
    s.scene = scene_index;
    s.origin_x = ox;
    s.origin_y = oy;
    materialize(scene, chunk, s);
    const auto sel = geo::greedy_view_selection(scene.views, s.frame, config.k_views,
                                                config.downsample, config.depth_threshold);
    s.view_ids = sel.view_ids;
    result.samples.push_back(std::move(s));
  }
  return result;
}

std::vector<Sample> augment_rotations(const Scene& scene, const Sample& sample,
                                      const SamplerConfig& config) {
  if (8 % config.rotations != 0) {
    throw std::invalid_argument("augment_rotations: rotations must divide 8");
  }
  std::vector<Sample> out;
  const int step = 8 / config.rotations;
  for (int r = 0; r < config.rotations; ++r) {
    Sample s = sample;
    s.rotation = (sample.rotation + r * step) % 8;
    materialize(scene, config.chunk, s);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> class_weights_from_counts(std::span<const std::uint64_t> counts) {
  std::vector<double> present;
  for (auto c : counts) {
    if (c > 0) present.push_back(static_cast<double>(c));
  }
  if (present.empty()) throw std::invalid_argument("class weights: no annotated voxels");
  std::sort(present.begin(), present.end());
  const std::size_t n = present.size();
  const double median = n % 2 == 1 ? present[n / 2] : 0.5 * (present[n / 2 - 1] + present[n / 2]);
  std::vector<double> w(counts.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    w[c] = counts[c] == 0 ? 10.0 : std::clamp(median / static_cast<double>(counts[c]), 0.1, 10.0);
    sum += w[c];
  }
  const double mean = sum / static_cast<double>(w.size());
  for (auto& x : w) x /= mean;
  return w;
}

std::vector<double> class_histogram_weights(std::span<const Sample> samples, int n_classes) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(n_classes), 0);
  for (const auto& s : samples) {
    for (ClassId c : s.column_labels) {
      if (c < n_classes) ++counts[c];
    }
  }
  return class_weights_from_counts(counts);
}

}  // namespace vv::data
