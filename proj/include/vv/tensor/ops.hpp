#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vv/common/labels.hpp"
#include "vv/tensor/graph.hpp"
#include "vv/tensor/tensor.hpp"

// Differentiable layer operations. Every op takes a nullable Graph*: with a
// graph the op tapes its backward rule, without one it is a plain forward.
// There is no batch axis; inputs are [C, spatial...].

namespace vv::ops {

struct ConvSpec {
  int rank = 3;                  ///< number of spatial axes, 2 or 3
  std::vector<int> stride;       ///< per spatial axis, empty means all 1
  std::vector<int> padding;      ///< per spatial axis, empty means all 0
};

/// input [C_in, s...], weight [C_out, C_in, k...], bias [C_out].
Tensor conv(Graph* graph, const Tensor& input, const Tensor& weight, const Tensor& bias,
            const ConvSpec& spec);

Tensor relu(Graph* graph, const Tensor& input);

struct DropoutSpec {
  double p = 0.0;
  bool training = false;
  std::uint64_t seed = 0;
};

/// Inverted dropout: survivors are scaled by 1/(1-p); identity in eval mode.
Tensor dropout(Graph* graph, const Tensor& input, const DropoutSpec& spec);

/// input [N] or [R, N] (rows are independent), weight [M, N], bias [M].
Tensor linear(Graph* graph, const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Non-overlapping channelwise max pool; ties go to the lowest flat index.
Tensor maxpool(Graph* graph, const Tensor& input, int rank, const std::vector<int>& window);

/// Concatenates [Ca, s...] and [Cb, s...] into [Ca + Cb, s...].
Tensor concat_channels(Graph* graph, const Tensor& a, const Tensor& b);

/// [C, X, Y, Z] -> [Z, C*X*Y]: one feature row per height level.
Tensor height_rows(Graph* graph, const Tensor& volume);

/// [C, s...] -> [prod(s), C]: one logit row per spatial position.
Tensor channels_last_rows(Graph* graph, const Tensor& input);

Tensor add(Graph* graph, const Tensor& a, const Tensor& b);
Tensor scale(Graph* graph, const Tensor& a, Real factor);

/// Scalar sum_i weights[i] * x[i].
Tensor weighted_sum(Graph* graph, const Tensor& x, std::span<const Real> weights);

/// Class-weighted softmax cross entropy over [N_items, N_classes] logits,
/// normalized by the total weight of annotated items. Rows labelled
/// kUnannotated take no part in the value and receive exactly zero gradient.
/// Returns nullopt (the empty-loss signal) when no item is annotated.
std::optional<Tensor> masked_weighted_cross_entropy(Graph* graph, const Tensor& logits,
                                                    std::span<const ClassId> labels,
                                                    std::span<const Real> class_weights);

}  // namespace vv::ops
