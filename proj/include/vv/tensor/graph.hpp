#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vv/tensor/tensor.hpp"

namespace vv {

/// Raised when an op produces a NaN or infinity while the graph is checking.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& op, const std::string& phase)
      : std::runtime_error("non-finite " + phase + " in op '" + op + "'"), op_(op) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

/// Tape of recorded operations for one forward/backward pass.
///
/// Confined to a single thread. backward() replays the closures in exact
/// reverse recording order.
class Graph {
 public:
  using BackwardFn = std::function<void()>;

  /// Records an op producing `output`. Ops whose output does not require a
  /// gradient still pass through the finiteness check but are not taped.
  void record(const std::string& op, const Tensor& output, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded backward closure.
  void backward(Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  std::vector<std::string> op_names() const;

  void set_check_finite(bool flag) { check_finite_ = flag; }
  bool check_finite() const { return check_finite_; }

 private:
  struct Entry {
    std::string op;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  bool check_finite_ = false;
};

/// Records `backward` on `graph` when the graph is non-null.
inline void record_op(Graph* graph, const std::string& op, const Tensor& output,
                      Graph::BackwardFn backward) {
  if (graph != nullptr) graph->record(op, output, std::move(backward));
}

}  // namespace vv
