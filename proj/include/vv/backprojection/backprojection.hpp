#pragma once

#include <span>
#include <vector>

#include "vv/geometry/grids.hpp"
#include "vv/tensor/graph.hpp"
#include "vv/tensor/tensor.hpp"

namespace vv::bp {

/// Scatters a 2D feature map [C, H, W] into the voxels of `map`:
/// out[:, v] = feat[:, assoc(v)], zero where v has no association. The backward
/// rule is the adjoint, summing voxel gradients back into their shared pixel.
Tensor backproject(Graph* graph, const Tensor& features, const geo::AssociationMap& map);

/// The adjoint of backproject on its own: [C, X, Y, Z] -> [C, H, W].
Tensor backproject_adjoint(const Tensor& volume_grad, const geo::AssociationMap& map, int height,
                           int width);

/// Per-voxel flag: 1 where the map holds an association.
std::vector<std::uint8_t> contribution_mask(const geo::AssociationMap& map);

struct PooledFeatures {
  Tensor features;                 ///< [C, X, Y, Z]
  std::vector<std::int32_t> argmax;  ///< per (channel, voxel): winning view, -1 if none
};

/// Channelwise maximum over views, restricted to the views whose mask marks
/// the voxel (all views when `masks` is empty). Ties go to the lowest view
/// index; voxels with no contributing view get zero and argmax -1. Gradients
/// flow only to the winning view.
PooledFeatures multiview_maxpool(Graph* graph, std::span<const Tensor> volumes,
                                 std::span<const std::vector<std::uint8_t>> masks = {});

}  // namespace vv::bp
