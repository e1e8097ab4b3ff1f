#include "vv/tensor/tensor.hpp"

#include <cmath>
#include <sstream>

namespace vv {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (const auto d : shape) {
    if (d <= 0) throw ShapeError("shape " + shape_string(shape) + " has a non-positive extent");
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream ss;
  ss << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) ss << (i ? ", " : "") << shape[i];
  ss << ']';
  return ss.str();
}

Tensor::Tensor(Shape shape, Real fill) : impl_(std::make_shared<Impl>()) {
  const auto n = shape_numel(shape);
  impl_->shape = std::move(shape);
  impl_->data.assign(static_cast<std::size_t>(n), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> values) : impl_(std::make_shared<Impl>()) {
  const auto n = shape_numel(shape);
  if (static_cast<std::int64_t>(values.size()) != n) {
    throw ShapeError("tensor of shape " + shape_string(shape) + " needs " + std::to_string(n) +
                     " values, got " + std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

Tensor Tensor::scalar(Real value) { return Tensor(Shape{1}, std::vector<Real>{value}); }

const Tensor::Impl& Tensor::impl() const {
  if (!impl_) throw std::logic_error("use of an undefined tensor");
  return *impl_;
}

Tensor::Impl& Tensor::impl() {
  if (!impl_) throw std::logic_error("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::int64_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("axis out of range for shape " + shape_string(s));
  return s[axis];
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(impl().data.size()); }

std::span<Real> Tensor::data() { return impl().data; }
std::span<const Real> Tensor::data() const { return impl().data; }

Real Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  return impl().data[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  impl().requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const { return !impl().grad.empty(); }

std::span<Real> Tensor::grad() {
  if (!has_grad()) throw std::logic_error("tensor has no gradient");
  return impl().grad;
}

std::span<const Real> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor has no gradient");
  return impl().grad;
}

std::span<Real> Tensor::ensure_grad() {
  auto& i = impl();
  if (i.grad.empty()) i.grad.assign(i.data.size(), 0.0);
  return i.grad;
}

void Tensor::clear_grad() {
  auto& i = impl();
  i.grad.clear();
  i.grad.shrink_to_fit();
}

Tensor Tensor::clone() const {
  Tensor out;
  out.impl_ = std::make_shared<Impl>();
  out.impl_->shape = impl().shape;
  out.impl_->data = impl().data;
  out.impl_->requires_grad = impl().requires_grad;
  return out;
}

void accumulate_grad(Tensor& t, std::span<const Real> delta) {
  if (!t.requires_grad()) return;
  auto g = t.ensure_grad();
  if (g.size() != delta.size()) throw ShapeError("gradient length mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

bool all_finite(std::span<const Real> values) {
  for (const auto v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace vv
