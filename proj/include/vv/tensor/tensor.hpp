#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vv {

using Real = double;
using Shape = std::vector<std::int64_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor (last axis fastest) with an optional gradient slot.
///
/// Copies share storage, like a handle; use clone() for an independent copy.
/// The gradient buffer is allocated lazily on first accumulation.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0.0);
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor scalar(Real value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::int64_t dim(std::size_t axis) const;
  std::int64_t numel() const;

  std::span<Real> data();
  std::span<const Real> data() const;
  Real item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<Real> grad();
  std::span<const Real> grad() const;
  /// Returns the gradient buffer, allocating zeros if absent.
  std::span<Real> ensure_grad();
  void clear_grad();

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<Real> data;
    std::vector<Real> grad;
    bool requires_grad = false;
  };
  const Impl& impl() const;
  Impl& impl();

  std::shared_ptr<Impl> impl_;
};

/// Adds `delta` into t's gradient when t requires one; a no-op otherwise.
void accumulate_grad(Tensor& t, std::span<const Real> delta);

bool all_finite(std::span<const Real> values);

}  // namespace vv
