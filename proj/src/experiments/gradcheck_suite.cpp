#include "vv/experiments/gradcheck_suite.hpp"

#include <chrono>
#include <functional>
#include <random>

#include "vv/backprojection/backprojection.hpp"
#include "vv/networks/networks.hpp"
#include "vv/tensor/gradcheck.hpp"
#include "vv/tensor/ops.hpp"

namespace vv::exp {
namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

std::vector<Real> random_weights(std::size_t n, std::mt19937_64& rng) {
  std::vector<Real> w(n);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (auto& v : w) v = d(rng);
  return w;
}

geo::AssociationMap random_map(const geo::GridDims& dims, int w, int h, std::mt19937_64& rng) {
  geo::AssociationMap m(dims, 1, w, h);
  for (std::size_t i = 0; i < dims.count(); ++i) {
    if (rng() % 4 != 0) {
      m.set(i, geo::Pixel{static_cast<int>(rng() % static_cast<unsigned>(w)),
                          static_cast<int>(rng() % static_cast<unsigned>(h))});
    }
  }
  return m;
}

GradCheckCase timed(const std::string& name, const std::function<Tensor(Graph&)>& fn,
                    std::vector<Tensor>& inputs, const GradCheckOptions& options = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = gradient_check(fn, inputs, options);
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  return {name, r.max_rel_error, r.coordinates_checked, dt.count()};
}

nn::NetworkConfig joint_network(nn::FusionPoint fusion) {
  nn::NetworkConfig c;
  c.n_classes = 4;
  c.n_feat_2d = 3;
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

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckCase> out;

  {
    std::vector<Tensor> in{random_tensor(Shape{2, 6, 5}, rng), random_tensor(Shape{3, 2, 3, 3}, rng),
                           random_tensor(Shape{3}, rng)};
    const auto w = random_weights(3 * 3 * 3, rng);
    out.push_back(timed("conv2d", [&](Graph& g) {
      return ops::weighted_sum(&g, ops::conv(&g, in[0], in[1], in[2], {2, {2, 2}, {1, 1}}), w);
    }, in));
  }
  {
    std::vector<Tensor> in{random_tensor(Shape{2, 4, 4, 5}, rng),
                           random_tensor(Shape{2, 2, 3, 3, 3}, rng), random_tensor(Shape{2}, rng)};
    const auto w = random_weights(2 * 4 * 4 * 5, rng);
    out.push_back(timed("conv3d", [&](Graph& g) {
      return ops::weighted_sum(&g, ops::conv(&g, in[0], in[1], in[2], {3, {}, {1, 1, 1}}), w);
    }, in));
  }
  {
    std::vector<Tensor> in{random_tensor(Shape{3, 5}, rng), random_tensor(Shape{4, 5}, rng),
                           random_tensor(Shape{4}, rng)};
    const auto w = random_weights(12, rng);
    out.push_back(timed("linear", [&](Graph& g) {
      return ops::weighted_sum(&g, ops::linear(&g, in[0], in[1], in[2]), w);
    }, in));
  }
  {
    std::vector<Tensor> in{random_tensor(Shape{2, 4, 6, 4}, rng)};
    const auto w = random_weights(2 * 2 * 3 * 2, rng);
    out.push_back(timed("maxpool", [&](Graph& g) {
      return ops::weighted_sum(&g, ops::maxpool(&g, in[0], 3, {2, 2, 2}), w);
    }, in));
  }
  {
    const geo::GridDims dims{3, 3, 4};
    const auto map = random_map(dims, 5, 4, rng);
    std::vector<Tensor> in{random_tensor(Shape{2, 4, 5}, rng)};
    const auto w = random_weights(2 * dims.count(), rng);
    out.push_back(timed("backprojection", [&](Graph& g) {
      return ops::weighted_sum(&g, bp::backproject(&g, in[0], map), w);
    }, in));
  }
  {
    std::vector<Tensor> in;
    for (int v = 0; v < 3; ++v) in.push_back(random_tensor(Shape{2, 2, 2, 3}, rng));
    std::vector<std::vector<std::uint8_t>> masks(3, std::vector<std::uint8_t>(12, 1));
    masks[1][4] = 0;
    masks[2][7] = 0;
    const auto w = random_weights(2 * 12, rng);
    out.push_back(timed("multiview_maxpool", [&](Graph& g) {
      return ops::weighted_sum(&g, bp::multiview_maxpool(&g, in, masks).features, w);
    }, in));
  }
  {
    std::vector<Tensor> in{random_tensor(Shape{6, 4}, rng, -2.0, 2.0)};
    const std::vector<ClassId> labels{0, kUnannotated, 3, 1, kUnannotated, 2};
    const std::vector<Real> weights{1.0, 0.5, 2.0, 1.5};
    out.push_back(timed("masked_loss", [&](Graph& g) {
      return *ops::masked_weighted_cross_entropy(&g, in[0], labels, weights);
    }, in));
  }
  for (auto fusion : {nn::FusionPoint::Begin, nn::FusionPoint::OneThird, nn::FusionPoint::TwoThirds,
                      nn::FusionPoint::End}) {
    const auto c = joint_network(fusion);
    nn::Model model(c, seed + 1);
    nn::ChunkInput input;
    input.geometry = Tensor(Shape{2, c.chunk_x, c.chunk_y, c.chunk_z});
    const auto n = static_cast<std::size_t>(c.chunk_x) * c.chunk_y * c.chunk_z;
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = rng() % 3;
      input.geometry.data()[i] = s == 2 ? 1.0 : 0.0;
      input.geometry.data()[n + i] = s >= 1 ? 1.0 : 0.0;
    }
    input.rgb_features = random_tensor(Shape{c.n_feat_2d, c.chunk_x, c.chunk_y, c.chunk_z}, rng, 0, 1);
    std::vector<ClassId> labels(static_cast<std::size_t>(c.chunk_z));
    for (auto& l : labels) l = static_cast<ClassId>(rng() % 4);
    labels[3] = kUnannotated;
    const std::vector<Real> weights{1.0, 0.5, 2.0, 1.5};
    std::vector<Tensor> in{input.rgb_features};
    for (auto& p : model.parameters()) {
      if (!nn::Model::is_encoder_parameter(p.name)) in.push_back(p.value);
    }
    out.push_back(timed("joint_network_" + nn::to_string(fusion), [&](Graph& g) {
      return *ops::masked_weighted_cross_entropy(&g, model.forward(&g, input), labels, weights);
    }, in, GradCheckOptions{.max_coords_per_input = 40, .seed = seed}));
  }
  return out;
}

}  // namespace vv::exp
