#include "vv/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace vv {
namespace {

Real evaluate(const std::function<Tensor(Graph&)>& fn) {
  Graph graph;
  graph.set_check_finite(true);
  const Tensor out = fn(graph);
  return out.item();
}

}  // namespace

GradCheckResult gradient_check(const std::function<Tensor(Graph&)>& fn, std::span<Tensor> inputs,
                               const GradCheckOptions& options) {
  if (!(options.epsilon >= 1e-7 && options.epsilon <= 1e-3)) {
    throw std::invalid_argument("gradient_check: epsilon must lie in [1e-7, 1e-3]");
  }
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.clear_grad();
  }
  {
    Graph graph;
    graph.set_check_finite(true);
    Tensor out = fn(graph);
    if (out.numel() != 1) {
      throw ShapeError("gradient_check: function must return a scalar, got " +
                       shape_string(out.shape()));
    }
    graph.backward(out);
  }
  std::vector<std::vector<Real>> analytic;
  analytic.reserve(inputs.size());
  for (auto& t : inputs) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
    }
    t.clear_grad();
  }

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    auto values = inputs[ti].data();
    std::vector<std::size_t> coords(values.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_input != 0 && coords.size() > options.max_coords_per_input) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_input);
      std::sort(coords.begin(), coords.end());
    }
    for (const auto c : coords) {
      const Real saved = values[c];
      values[c] = saved + options.epsilon;
      const Real plus = evaluate(fn);
      values[c] = saved - options.epsilon;
      const Real minus = evaluate(fn);
      values[c] = saved;
      const Real numeric = (plus - minus) / (2.0 * options.epsilon);
      const Real a = analytic[ti][c];
      const Real err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++result.coordinates_checked;
      if (result.coordinates_checked == 1 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_input = ti;
        result.worst_coordinate = c;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace vv
