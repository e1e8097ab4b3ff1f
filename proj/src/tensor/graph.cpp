#include "vv/tensor/graph.hpp"

#include <algorithm>

namespace vv {

void Graph::record(const std::string& op, const Tensor& output, BackwardFn backward) {
  if (check_finite_ && !all_finite(output.data())) throw NonFiniteError(op, "forward value");
  if (!output.requires_grad()) return;
  entries_.push_back(Entry{op, output, std::move(backward)});
}

void Graph::backward(Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  loss.ensure_grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    if (check_finite_ && !all_finite(it->output.grad())) {
      throw NonFiniteError(it->op, "gradient");
    }
    it->backward();
  }
}

std::vector<std::string> Graph::op_names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  std::transform(entries_.begin(), entries_.end(), std::back_inserter(names),
                 [](const Entry& e) { return e.op; });
  return names;
}

}  // namespace vv
