#include "vv/backprojection/backprojection.hpp"

#include <string>

namespace vv::bp {
namespace {

void check_map_against(const Tensor& features, const geo::AssociationMap& map) {
  if (features.rank() != 3) {
    throw ShapeError("backproject: features must be [C, H, W], got " +
                     shape_string(features.shape()));
  }
  const auto h = features.dim(1), w = features.dim(2);
  const auto& flat = map.flat_indices();
  for (const auto idx : flat) {
    if (idx < 0) continue;
    const auto u = idx % map.feature_width(), v = idx / map.feature_width();
    if (u >= w || v >= h) {
      throw ShapeError("backproject: association (" + std::to_string(u) + ", " +
                       std::to_string(v) + ") outside feature map " +
                       shape_string(features.shape()));
    }
  }
}

// Flat feature-map index of each voxel's pixel, or -1.
std::vector<std::int64_t> pixel_indices(const geo::AssociationMap& map, std::int64_t width) {
  std::vector<std::int64_t> out(map.flat_indices().size(), -1);
  for (std::size_t v = 0; v < out.size(); ++v) {
    const auto idx = map.flat(v);
    if (idx < 0) continue;
    out[v] = (idx / map.feature_width()) * width + idx % map.feature_width();
  }
  return out;
}

void scatter_add(const Real* grad3d, std::int64_t channels, const std::vector<std::int64_t>& pix,
                 std::int64_t plane, Real* grad2d) {
  const auto voxels = static_cast<std::int64_t>(pix.size());
  for (std::int64_t c = 0; c < channels; ++c) {
    const Real* g = grad3d + c * voxels;
    Real* out = grad2d + c * plane;
    for (std::int64_t v = 0; v < voxels; ++v) {
      if (pix[static_cast<std::size_t>(v)] >= 0) out[pix[static_cast<std::size_t>(v)]] += g[v];
    }
  }
}

}  // namespace

Tensor backproject(Graph* graph, const Tensor& features, const geo::AssociationMap& map) {
  check_map_against(features, map);
  const auto channels = features.dim(0);
  const auto plane = features.dim(1) * features.dim(2);
  const auto& dims = map.dims();
  auto pix = pixel_indices(map, features.dim(2));
  const auto voxels = static_cast<std::int64_t>(pix.size());

  Tensor out(Shape{channels, dims.x, dims.y, dims.z});
  const Real* f = features.data().data();
  Real* o = out.data().data();
  for (std::int64_t c = 0; c < channels; ++c) {
    for (std::int64_t v = 0; v < voxels; ++v) {
      const auto p = pix[static_cast<std::size_t>(v)];
      if (p >= 0) o[c * voxels + v] = f[c * plane + p];
    }
  }
  out.set_requires_grad(features.requires_grad());
  record_op(graph, "backproject", out,
            [out, feats = features, pix = std::move(pix), channels, plane]() mutable {
              scatter_add(out.grad().data(), channels, pix, plane, feats.ensure_grad().data());
            });
  return out;
}

Tensor backproject_adjoint(const Tensor& volume_grad, const geo::AssociationMap& map, int height,
                           int width) {
  const auto& dims = map.dims();
  if (volume_grad.rank() != 4 || volume_grad.dim(1) != dims.x || volume_grad.dim(2) != dims.y ||
      volume_grad.dim(3) != dims.z) {
    throw ShapeError("backproject_adjoint: gradient " + shape_string(volume_grad.shape()) +
                     " does not match the association grid");
  }
  Tensor out(Shape{volume_grad.dim(0), height, width});
  check_map_against(out, map);
  scatter_add(volume_grad.data().data(), volume_grad.dim(0), pixel_indices(map, width),
              static_cast<std::int64_t>(height) * width, out.data().data());
  return out;
}

std::vector<std::uint8_t> contribution_mask(const geo::AssociationMap& map) {
  std::vector<std::uint8_t> mask(map.flat_indices().size());
  for (std::size_t v = 0; v < mask.size(); ++v) mask[v] = map.flat(v) >= 0 ? 1 : 0;
  return mask;
}

PooledFeatures multiview_maxpool(Graph* graph, std::span<const Tensor> volumes,
                                 std::span<const std::vector<std::uint8_t>> masks) {
  if (volumes.empty()) throw std::invalid_argument("multiview_maxpool: no input volumes");
  const Shape& shape = volumes.front().shape();
  if (shape.size() != 4) {
    throw ShapeError("multiview_maxpool: volumes must be [C, X, Y, Z], got " + shape_string(shape));
  }
  for (const auto& v : volumes) {
    if (v.shape() != shape) {
      throw ShapeError("multiview_maxpool: shape mismatch " + shape_string(v.shape()) + " vs " +
                       shape_string(shape));
    }
  }
  const auto channels = shape[0];
  const auto voxels = shape[1] * shape[2] * shape[3];
  if (!masks.empty()) {
    if (masks.size() != volumes.size()) {
      throw std::invalid_argument("multiview_maxpool: one mask per volume required");
    }
    for (const auto& m : masks) {
      if (static_cast<std::int64_t>(m.size()) != voxels) {
        throw ShapeError("multiview_maxpool: mask size does not match the volume");
      }
    }
  }

  PooledFeatures out{Tensor(shape), std::vector<std::int32_t>(static_cast<std::size_t>(channels * voxels), -1)};
  Real* o = out.features.data().data();
  bool any_grad = false;
  for (std::size_t view = 0; view < volumes.size(); ++view) {
    any_grad = any_grad || volumes[view].requires_grad();
    const Real* x = volumes[view].data().data();
    const std::uint8_t* mask = masks.empty() ? nullptr : masks[view].data();
    for (std::int64_t c = 0; c < channels; ++c) {
      for (std::int64_t v = 0; v < voxels; ++v) {
        if (mask && !mask[v]) continue;
        const auto i = static_cast<std::size_t>(c * voxels + v);
        // Strict comparison keeps the lowest view index on ties.
        if (out.argmax[i] < 0 || x[i] > o[i]) {
          o[i] = x[i];
          out.argmax[i] = static_cast<std::int32_t>(view);
        }
      }
    }
  }
  out.features.set_requires_grad(any_grad);
  std::vector<Tensor> inputs(volumes.begin(), volumes.end());
  record_op(graph, "multiview_maxpool", out.features,
            [pooled = out.features, argmax = out.argmax, inputs = std::move(inputs)]() mutable {
              const auto g = pooled.grad();
              for (std::size_t i = 0; i < g.size(); ++i) {
                const auto view = argmax[i];
                if (view < 0) continue;
                auto& t = inputs[static_cast<std::size_t>(view)];
                if (t.requires_grad()) t.ensure_grad()[i] += g[i];
              }
            });
  return out;
}

}  // namespace vv::bp
