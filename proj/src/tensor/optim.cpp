#include "vv/tensor/optim.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace vv {

Parameter::Parameter(std::string param_name, Tensor param_value)
    : name(std::move(param_name)), value(std::move(param_value)) {
  value.set_requires_grad(true);
  velocity.assign(static_cast<std::size_t>(value.numel()), 0.0);
}

void sgd_momentum_step(std::span<Parameter* const> params, Real lr, Real momentum) {
  for (const auto* p : params) {
    if (!p->value.has_grad()) {
      throw std::logic_error("sgd_momentum_step: parameter '" + p->name + "' has no gradient");
    }
    if (p->velocity.size() != static_cast<std::size_t>(p->value.numel())) {
      throw std::logic_error("sgd_momentum_step: velocity size mismatch for '" + p->name + "'");
    }
  }
  for (auto* p : params) {
    auto w = p->value.data();
    const auto g = p->value.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      p->velocity[i] = momentum * p->velocity[i] + g[i];
      w[i] -= lr * p->velocity[i];
    }
    p->value.clear_grad();
  }
}

void sgd_momentum_step(std::span<Parameter> params, Real lr, Real momentum) {
  std::vector<Parameter*> ptrs;
  for (auto& p : params) ptrs.push_back(&p);
  sgd_momentum_step(ptrs, lr, momentum);
}

Tensor uniform_fan_in(Shape shape, std::int64_t fan_in, std::uint64_t seed) {
  if (fan_in <= 0) throw std::invalid_argument("uniform_fan_in: fan_in must be positive");
  Tensor t(std::move(shape));
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace vv
