#pragma once

#include <random>

#include "vv/datagen/sampler.hpp"
#include "vv/networks/networks.hpp"

namespace vv::testing {

/// A network small enough for finite differences: 8x8x16 chunks, 32x24 images.
inline nn::NetworkConfig tiny_network(nn::InputMode mode = nn::InputMode::Fused,
                                      nn::FusionPoint fusion = nn::FusionPoint::TwoThirds) {
  nn::NetworkConfig c;
  c.n_classes = 4;
  c.n_feat_2d = 3;
  c.input_mode = mode;
  c.fusion_point = fusion;
  c.widths_3d = {3, 3, 3, 4, 4, 4, 4, 4, 4};
  c.encoder_widths = {3, 3, 3};
  c.head_hidden = 5;
  c.dropout_p = 0.0;
  c.image_width = 32;
  c.image_height = 24;
  c.chunk_x = 8;
  c.chunk_y = 8;
  c.chunk_z = 16;
  return c;
}

/// A 28x28x16 room sized for 9x9x16 chunks and 64x48 images.
inline data::SceneSpec tiny_scene() {
  data::SceneSpec s;
  s.size_x = 28;
  s.size_y = 28;
  s.size_z = 16;
  s.n_objects = 8;
  s.cube_size = 4;
  s.cylinder_radius = 2;
  s.cylinder_height = 8;
  s.slab_size = 5;
  s.slab_thickness = 1;
  s.slab_elevation = 5;
  s.min_gap = 1;
  s.n_views = 16;
  s.image_width = 64;
  s.image_height = 48;
  s.chunk_x = 9;
  s.chunk_y = 9;
  return s;
}

inline data::SamplerConfig tiny_sampler(std::uint64_t seed = 0) {
  data::SamplerConfig c;
  c.chunk = {9, 9, 16};
  c.downsample = 4;
  c.seed = seed;
  return c;
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

/// Random binary geometry with occupied implying known.
inline Tensor random_geometry(int x, int y, int z, std::mt19937_64& rng) {
  Tensor t(Shape{2, x, y, z});
  std::uniform_int_distribution<int> state(0, 2);
  const auto n = static_cast<std::size_t>(x) * y * z;
  for (std::size_t i = 0; i < n; ++i) {
    const int s = state(rng);
    t.data()[i] = s == 2 ? 1.0 : 0.0;
    t.data()[n + i] = s >= 1 ? 1.0 : 0.0;
  }
  return t;
}

}  // namespace vv::testing
