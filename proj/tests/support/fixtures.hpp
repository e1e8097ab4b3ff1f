#pragma once

#include "tiny.hpp"
#include "vv/training/training.hpp"

namespace vv::testing {

/// The smallest network that learns the tiny scenes: 64x48 images, 16x12
/// feature maps, 9x9x16 chunks.
inline nn::NetworkConfig training_network(nn::InputMode mode = nn::InputMode::Fused,
                                          nn::FusionPoint fusion = nn::FusionPoint::TwoThirds) {
  nn::NetworkConfig c;
  c.n_classes = data::kNumClasses;
  c.n_feat_2d = 8;
  c.input_mode = mode;
  c.fusion_point = fusion;
  c.widths_3d = {8, 8, 8, 16, 16, 16, 16, 16, 16};
  c.encoder_widths = {8, 8};
  c.head_hidden = 32;
  c.dropout_p = 0.0;
  c.image_width = 64;
  c.image_height = 48;
  c.chunk_x = 9;
  c.chunk_y = 9;
  c.chunk_z = 16;
  c.init = nn::InitScheme::Kaiming;
  return c;
}

inline train::TrainConfig training_config(std::uint64_t seed = 0) {
  train::TrainConfig t;
  t.lr = 0.003;
  t.seed = seed;
  return t;
}

/// `n` samples of one tiny scene, as the overfit experiments use.
inline train::Dataset overfit_dataset(std::size_t n = 16, std::uint64_t scene_seed = 3,
                                      std::uint64_t sampler_seed = 1) {
  train::Dataset d;
  d.scenes.push_back(data::generate_scene(scene_seed, tiny_scene()).scene);
  d.samples = data::sample_chunks(d.scenes[0], 0, tiny_sampler(sampler_seed), n).samples;
  d.class_weights = data::class_histogram_weights(d.samples, data::kNumClasses);
  return d;
}

/// Center-column accuracy over the annotated voxels of `samples`.
inline double column_accuracy(const nn::Model& model, const train::Dataset& data) {
  train::SceneCache cache;
  std::size_t correct = 0, total = 0;
  const int nc = model.config().n_classes;
  for (const auto& s : data.samples) {
    const auto out = train::forward_sample(nullptr, model, data.scenes[static_cast<std::size_t>(s.scene)],
                                           s.scene, s, cache, {});
    const auto d = out.column_logits.data();
    for (std::size_t k = 0; k < s.column_labels.size(); ++k) {
      if (!is_annotated(s.column_labels[k])) continue;
      ++total;
      std::size_t best = 0;
      for (std::size_t q = 1; q < static_cast<std::size_t>(nc); ++q) {
        if (d[k * nc + q] > d[k * nc + best]) best = q;
      }
      correct += best == s.column_labels[k];
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace vv::testing
