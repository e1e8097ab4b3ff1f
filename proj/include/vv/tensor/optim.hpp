#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vv/tensor/tensor.hpp"

namespace vv {

/// A learned tensor plus its momentum buffer.
struct Parameter {
  Parameter() = default;
  Parameter(std::string param_name, Tensor param_value);

  std::string name;
  Tensor value;
  std::vector<Real> velocity;
};

/// v <- momentum * v + grad; value <- value - lr * v; then clears the gradients.
/// Throws if any parameter lacks a gradient.
void sgd_momentum_step(std::span<Parameter> params, Real lr, Real momentum);
void sgd_momentum_step(std::span<Parameter* const> params, Real lr, Real momentum);

/// Uniform in +-sqrt(1/fan_in), drawn from a generator seeded with `seed`.
Tensor uniform_fan_in(Shape shape, std::int64_t fan_in, std::uint64_t seed);

}  // namespace vv
