#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "vv/tensor/graph.hpp"
#include "vv/tensor/tensor.hpp"

namespace vv {

struct GradCheckOptions {
  double epsilon = 1e-6;
  /// Coordinates probed per input; 0 probes every coordinate.
  std::size_t max_coords_per_input = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t worst_input = 0;
  std::size_t worst_coordinate = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences. `fn` must read `inputs` (it is re-run with perturbed data) and
/// return a one-element tensor. Error per coordinate is
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
///
/// Runs with finiteness checking on; a NaN/inf anywhere raises NonFiniteError
/// naming the op.
GradCheckResult gradient_check(const std::function<Tensor(Graph&)>& fn, std::span<Tensor> inputs,
                               const GradCheckOptions& options = {});

}  // namespace vv
