#include "vv/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <type_traits>

#include <Eigen/Core>

namespace vv::ops {
namespace {

using Index = std::int64_t;

// Convolution / pooling geometry lifted to three spatial axes; rank-2 inputs
// get a leading singleton axis.
struct Geometry3 {
  Index channels_in = 0;
  Index channels_out = 0;
  Index in[3] = {1, 1, 1};
  Index kernel[3] = {1, 1, 1};
  Index out[3] = {1, 1, 1};
  Index stride[3] = {1, 1, 1};
  Index pad[3] = {0, 0, 0};

  Index in_volume() const { return in[0] * in[1] * in[2]; }
  Index out_volume() const { return out[0] * out[1] * out[2]; }
  Index kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
};

void check_rank(const char* op, int rank) {
  if (rank != 2 && rank != 3) {
    throw ShapeError(std::string(op) + ": spatial rank must be 2 or 3, got " +
                     std::to_string(rank));
  }
}

std::vector<int> per_axis(const char* op, const char* what, const std::vector<int>& v, int rank,
                          int fallback) {
  if (v.empty()) return std::vector<int>(static_cast<std::size_t>(rank), fallback);
  if (static_cast<int>(v.size()) != rank) {
    throw ShapeError(std::string(op) + ": " + what + " needs " + std::to_string(rank) +
                     " entries, got " + std::to_string(v.size()));
  }
  return v;
}

Geometry3 conv_geometry(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        const ConvSpec& spec) {
  check_rank("conv", spec.rank);
  const auto rank = static_cast<std::size_t>(spec.rank);
  if (input.rank() != rank + 1) {
    throw ShapeError("conv: input must be [C, spatial x" + std::to_string(rank) + "], got " +
                     shape_string(input.shape()));
  }
  if (weight.rank() != rank + 2) {
    throw ShapeError("conv: weight must be [C_out, C_in, kernel x" + std::to_string(rank) +
                     "], got " + shape_string(weight.shape()));
  }
  if (weight.dim(1) != input.dim(0)) {
    throw ShapeError("conv: input has " + std::to_string(input.dim(0)) +
                     " channels but weight expects " + std::to_string(weight.dim(1)) + " (input " +
                     shape_string(input.shape()) + ", weight " + shape_string(weight.shape()) +
                     ")");
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw ShapeError("conv: bias must be [" + std::to_string(weight.dim(0)) + "], got " +
                     shape_string(bias.shape()));
  }
  const auto stride = per_axis("conv", "stride", spec.stride, spec.rank, 1);
  const auto padding = per_axis("conv", "padding", spec.padding, spec.rank, 0);

  Geometry3 g;
  g.channels_in = input.dim(0);
  g.channels_out = weight.dim(0);
  const std::size_t offset = 3 - rank;
  for (std::size_t a = 0; a < rank; ++a) {
    if (stride[a] < 1) throw ShapeError("conv: stride must be >= 1");
    if (padding[a] < 0) throw ShapeError("conv: padding must be >= 0");
    const std::size_t k = offset + a;
    g.in[k] = input.dim(1 + a);
    g.kernel[k] = weight.dim(2 + a);
    g.stride[k] = stride[a];
    g.pad[k] = padding[a];
    const Index span = g.in[k] + 2 * g.pad[k] - g.kernel[k];
    if (span < 0) {
      throw ShapeError("conv: non-positive output extent on spatial axis " + std::to_string(a) +
                       " (input " + shape_string(input.shape()) + ", weight " +
                       shape_string(weight.shape()) + ")");
    }
    g.out[k] = span / g.stride[k] + 1;
  }
  return g;
}

Shape output_shape(Index channels, const Geometry3& g, int rank) {
  Shape s{channels};
  for (int k = 3 - rank; k < 3; ++k) s.push_back(g.out[k]);
  return s;
}

// Output positions o with 0 <= o*stride + offset - pad < in, as [lo, hi).
void valid_range(const Geometry3& g, int axis, Index offset, Index& lo, Index& hi) {
  const Index s = g.stride[axis];
  const Index low_num = g.pad[axis] - offset;
  lo = low_num <= 0 ? 0 : (low_num + s - 1) / s;
  const Index high_num = g.in[axis] - 1 + g.pad[axis] - offset;
  hi = high_num < 0 ? 0 : high_num / s + 1;
  hi = std::min(hi, g.out[axis]);
  lo = std::min(lo, hi);
}

// Unfolds the input into a [C_in * K, P] row-major patch matrix (zero where a
// tap falls into padding), or with `Scatter` accumulates such a matrix back.
template <bool Scatter>
void unfold(const Geometry3& g, std::conditional_t<Scatter, Real*, const Real*> image,
            std::conditional_t<Scatter, const Real*, Real*> cols) {
  const Index P = g.out_volume();
  const Index K = g.kernel_volume();
  for (Index ci = 0; ci < g.channels_in; ++ci) {
    for (Index a = 0; a < g.kernel[0]; ++a) {
      Index lo0, hi0;
      valid_range(g, 0, a, lo0, hi0);
      for (Index b = 0; b < g.kernel[1]; ++b) {
        Index lo1, hi1;
        valid_range(g, 1, b, lo1, hi1);
        for (Index c = 0; c < g.kernel[2]; ++c) {
          Index lo2, hi2;
          valid_range(g, 2, c, lo2, hi2);
          const Index row = ci * K + (a * g.kernel[1] + b) * g.kernel[2] + c;
          auto* crow = cols + row * P;
          if constexpr (!Scatter) std::fill(crow, crow + P, 0.0);
          if (lo2 >= hi2) continue;
          for (Index o0 = lo0; o0 < hi0; ++o0) {
            const Index i0 = o0 * g.stride[0] + a - g.pad[0];
            for (Index o1 = lo1; o1 < hi1; ++o1) {
              const Index i1 = o1 * g.stride[1] + b - g.pad[1];
              const Index in_base = ((ci * g.in[0] + i0) * g.in[1] + i1) * g.in[2] + c - g.pad[2];
              const Index out_base = (o0 * g.out[1] + o1) * g.out[2];
              const Index s2 = g.stride[2];
              for (Index z = lo2; z < hi2; ++z) {
                if constexpr (Scatter) {
                  image[in_base + z * s2] += crow[out_base + z];
                } else {
                  crow[out_base + z] = image[in_base + z * s2];
                }
              }
            }
          }
        }
      }
    }
  }
}

using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

}  // namespace

Tensor conv(Graph* graph, const Tensor& input, const Tensor& weight, const Tensor& bias,
            const ConvSpec& spec) {
  const Geometry3 g = conv_geometry(input, weight, bias, spec);
  Tensor out(output_shape(g.channels_out, g, spec.rank));
  const Index P = g.out_volume();
  const Index CK = g.channels_in * g.kernel_volume();
  {
    std::vector<Real> cols(static_cast<std::size_t>(CK * P));
    unfold<false>(g, input.data().data(), cols.data());
    MapMatrix o(out.data().data(), g.channels_out, P);
    o.noalias() = ConstMapMatrix(weight.data().data(), g.channels_out, CK) * ConstMapMatrix(cols.data(), CK, P);
    const auto bv = bias.data();
    for (Index co = 0; co < g.channels_out; ++co) o.row(co).array() += bv[co];
  }
  out.set_requires_grad(input.requires_grad() || weight.requires_grad() || bias.requires_grad());
  record_op(graph, spec.rank == 3 ? "conv3d" : "conv2d", out,
            [g, out, input = input, weight = weight, bias = bias]() mutable {
              const Index P = g.out_volume();
              const Index CK = g.channels_in * g.kernel_volume();
              ConstMapMatrix gout(out.grad().data(), g.channels_out, P);
              if (bias.requires_grad()) {
                auto gb = bias.ensure_grad();
                for (Index co = 0; co < g.channels_out; ++co) gb[co] += gout.row(co).sum();
              }
              if (weight.requires_grad()) {
                std::vector<Real> cols(static_cast<std::size_t>(CK * P));
                unfold<false>(g, input.data().data(), cols.data());
                MapMatrix gw(weight.ensure_grad().data(), g.channels_out, CK);
                gw.noalias() += gout * ConstMapMatrix(cols.data(), CK, P).transpose();
              }
              if (input.requires_grad()) {
                RowMatrix gcols = ConstMapMatrix(weight.data().data(), g.channels_out, CK).transpose() * gout;
                unfold<true>(g, input.ensure_grad().data(), gcols.data());
              }
            });
  return out;
}

Tensor relu(Graph* graph, const Tensor& input) {
  Tensor out(input.shape());
  const auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  out.set_requires_grad(input.requires_grad());
  record_op(graph, "relu", out, [out, input = input]() mutable {
    const auto g = out.grad();
    const auto x = input.data();
    auto gi = input.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) gi[i] += g[i];
    }
  });
  return out;
}

Tensor dropout(Graph* graph, const Tensor& input, const DropoutSpec& spec) {
  if (!(spec.p >= 0.0 && spec.p < 1.0)) {
    throw std::invalid_argument("dropout: p must lie in [0, 1), got " + std::to_string(spec.p));
  }
  if (!spec.training || spec.p == 0.0) {
    // Identity; the output still gets its own storage so callers may mutate it.
    Tensor out = input.clone();
    out.set_requires_grad(input.requires_grad());
    record_op(graph, "dropout", out, [out, input = input]() mutable {
      accumulate_grad(input, out.grad());
    });
    return out;
  }
  const Real keep_scale = 1.0 / (1.0 - spec.p);
  std::vector<Real> mask(static_cast<std::size_t>(input.numel()));
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& m : mask) m = unit(rng) < spec.p ? 0.0 : keep_scale;

  Tensor out(input.shape());
  const auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask[i];
  out.set_requires_grad(input.requires_grad());
  record_op(graph, "dropout", out, [out, input = input, mask = std::move(mask)]() mutable {
    const auto g = out.grad();
    auto gi = input.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * mask[i];
  });
  return out;
}

Tensor linear(Graph* graph, const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 1 && input.rank() != 2) {
    throw ShapeError("linear: input must be [N] or [R, N], got " + shape_string(input.shape()));
  }
  if (weight.rank() != 2) {
    throw ShapeError("linear: weight must be [M, N], got " + shape_string(weight.shape()));
  }
  const Index rows = input.rank() == 1 ? 1 : input.dim(0);
  const Index n = input.dim(input.rank() - 1);
  const Index m = weight.dim(0);
  if (weight.dim(1) != n) {
    throw ShapeError("linear: input length " + std::to_string(n) + " does not match weight " +
                     shape_string(weight.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != m) {
    throw ShapeError("linear: bias must be [" + std::to_string(m) + "], got " +
                     shape_string(bias.shape()));
  }
  Tensor out(input.rank() == 1 ? Shape{m} : Shape{rows, m});
  {
    const Real* x = input.data().data();
    const Real* w = weight.data().data();
    const Real* b = bias.data().data();
    Real* y = out.data().data();
    for (Index r = 0; r < rows; ++r) {
      for (Index i = 0; i < m; ++i) {
        Real acc = b[i];
        const Real* wr = w + i * n;
        const Real* xr = x + r * n;
        for (Index j = 0; j < n; ++j) acc += wr[j] * xr[j];
        y[r * m + i] = acc;
      }
    }
  }
  out.set_requires_grad(input.requires_grad() || weight.requires_grad() || bias.requires_grad());
  record_op(graph, "linear", out, [out, input = input, weight = weight, bias = bias, rows, n, m]() mutable {
    const Real* gy = out.grad().data();
    if (bias.requires_grad()) {
      auto gb = bias.ensure_grad();
      for (Index r = 0; r < rows; ++r) {
        for (Index i = 0; i < m; ++i) gb[i] += gy[r * m + i];
      }
    }
    if (weight.requires_grad()) {
      Real* gw = weight.ensure_grad().data();
      const Real* x = input.data().data();
      for (Index r = 0; r < rows; ++r) {
        for (Index i = 0; i < m; ++i) {
          const Real g = gy[r * m + i];
          Real* gwr = gw + i * n;
          const Real* xr = x + r * n;
          for (Index j = 0; j < n; ++j) gwr[j] += g * xr[j];
        }
      }
    }
    if (input.requires_grad()) {
      Real* gx = input.ensure_grad().data();
      const Real* w = weight.data().data();
      for (Index r = 0; r < rows; ++r) {
        for (Index i = 0; i < m; ++i) {
          const Real g = gy[r * m + i];
          const Real* wr = w + i * n;
          Real* gxr = gx + r * n;
          for (Index j = 0; j < n; ++j) gxr[j] += g * wr[j];
        }
      }
    }
  });
  return out;
}

Tensor maxpool(Graph* graph, const Tensor& input, int rank, const std::vector<int>& window) {
  check_rank("maxpool", rank);
  if (input.rank() != static_cast<std::size_t>(rank) + 1) {
    throw ShapeError("maxpool: input must be [C, spatial x" + std::to_string(rank) + "], got " +
                     shape_string(input.shape()));
  }
  const auto win = per_axis("maxpool", "window", window, rank, 1);
  Geometry3 g;
  g.channels_in = g.channels_out = input.dim(0);
  for (int a = 0; a < rank; ++a) {
    const int k = 3 - rank + a;
    if (win[a] < 1) throw ShapeError("maxpool: window must be >= 1");
    g.in[k] = input.dim(1 + a);
    g.kernel[k] = win[a];
    if (g.in[k] % win[a] != 0) {
      throw ShapeError("maxpool: extent " + std::to_string(g.in[k]) + " on spatial axis " +
                       std::to_string(a) + " is not divisible by window " +
                       std::to_string(win[a]));
    }
    g.out[k] = g.in[k] / win[a];
  }
  Tensor out(output_shape(g.channels_out, g, rank));
  std::vector<Index> argmax(static_cast<std::size_t>(out.numel()));
  const Real* x = input.data().data();
  Real* y = out.data().data();
  Index oi = 0;
  for (Index c = 0; c < g.channels_in; ++c) {
    for (Index o0 = 0; o0 < g.out[0]; ++o0) {
      for (Index o1 = 0; o1 < g.out[1]; ++o1) {
        for (Index o2 = 0; o2 < g.out[2]; ++o2, ++oi) {
          Index best = -1;
          Real best_v = 0.0;
          // Row-major traversal with a strict comparison keeps the lowest flat index on ties.
          for (Index a = 0; a < g.kernel[0]; ++a) {
            for (Index b = 0; b < g.kernel[1]; ++b) {
              for (Index d = 0; d < g.kernel[2]; ++d) {
                const Index idx = ((c * g.in[0] + o0 * g.kernel[0] + a) * g.in[1] +
                                   o1 * g.kernel[1] + b) *
                                      g.in[2] +
                                  o2 * g.kernel[2] + d;
                if (best < 0 || x[idx] > best_v) {
                  best = idx;
                  best_v = x[idx];
                }
              }
            }
          }
          y[oi] = best_v;
          argmax[oi] = best;
        }
      }
    }
  }
  out.set_requires_grad(input.requires_grad());
  record_op(graph, "maxpool", out, [out, input = input, argmax = std::move(argmax)]() mutable {
    const auto gy = out.grad();
    auto gx = input.ensure_grad();
    for (std::size_t i = 0; i < gy.size(); ++i) gx[argmax[i]] += gy[i];
  });
  return out;
}

Tensor concat_channels(Graph* graph, const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
    throw ShapeError("concat_channels: incompatible shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  Shape s = a.shape();
  s[0] += b.dim(0);
  Tensor out(s);
  auto y = out.data();
  std::copy(a.data().begin(), a.data().end(), y.begin());
  std::copy(b.data().begin(), b.data().end(), y.begin() + a.numel());
  out.set_requires_grad(a.requires_grad() || b.requires_grad());
  record_op(graph, "concat", out, [out, a = a, b = b]() mutable {
    const auto g = out.grad();
    accumulate_grad(a, g.subspan(0, static_cast<std::size_t>(a.numel())));
    accumulate_grad(b, g.subspan(static_cast<std::size_t>(a.numel())));
  });
  return out;
}

namespace {

// out[c, r] = in[r, c] for an input viewed as [rows, cols].
Tensor transpose_view(Graph* graph, const char* op, const Tensor& input, Index rows, Index cols,
                      Shape out_shape) {
  Tensor out(std::move(out_shape));
  const Real* x = input.data().data();
  Real* y = out.data().data();
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) y[c * rows + r] = x[r * cols + c];
  }
  out.set_requires_grad(input.requires_grad());
  record_op(graph, op, out, [out, input = input, rows, cols]() mutable {
    const Real* gy = out.grad().data();
    Real* gx = input.ensure_grad().data();
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) gx[r * cols + c] += gy[c * rows + r];
    }
  });
  return out;
}

}  // namespace

Tensor height_rows(Graph* graph, const Tensor& volume) {
  if (volume.rank() != 4) {
    throw ShapeError("height_rows: expected [C, X, Y, Z], got " + shape_string(volume.shape()));
  }
  const Index z = volume.dim(3);
  const Index rest = volume.numel() / z;
  return transpose_view(graph, "height_rows", volume, rest, z, Shape{z, rest});
}

Tensor channels_last_rows(Graph* graph, const Tensor& input) {
  if (input.rank() < 2) {
    throw ShapeError("channels_last_rows: expected [C, spatial...], got " +
                     shape_string(input.shape()));
  }
  const Index c = input.dim(0);
  const Index rest = input.numel() / c;
  return transpose_view(graph, "channels_last_rows", input, c, rest, Shape{rest, c});
}

Tensor add(Graph* graph, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  Tensor out(a.shape());
  auto y = out.data();
  const auto x1 = a.data();
  const auto x2 = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x1[i] + x2[i];
  out.set_requires_grad(a.requires_grad() || b.requires_grad());
  record_op(graph, "add", out, [out, a = a, b = b]() mutable {
    accumulate_grad(a, out.grad());
    accumulate_grad(b, out.grad());
  });
  return out;
}

Tensor scale(Graph* graph, const Tensor& a, Real factor) {
  Tensor out(a.shape());
  auto y = out.data();
  const auto x = a.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = factor * x[i];
  out.set_requires_grad(a.requires_grad());
  record_op(graph, "scale", out, [out, a = a, factor]() mutable {
    const auto g = out.grad();
    auto gx = a.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
  });
  return out;
}

Tensor weighted_sum(Graph* graph, const Tensor& x, std::span<const Real> weights) {
  if (static_cast<Index>(weights.size()) != x.numel()) {
    throw ShapeError("weighted_sum: " + std::to_string(weights.size()) + " weights for tensor " +
                     shape_string(x.shape()));
  }
  Real acc = 0.0;
  const auto v = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) acc += weights[i] * v[i];
  Tensor out = Tensor::scalar(acc);
  out.set_requires_grad(x.requires_grad());
  std::vector<Real> w(weights.begin(), weights.end());
  record_op(graph, "weighted_sum", out, [out, x = x, w = std::move(w)]() mutable {
    const Real g = out.grad()[0];
    auto gx = x.ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * w[i];
  });
  return out;
}

std::optional<Tensor> masked_weighted_cross_entropy(Graph* graph, const Tensor& logits,
                                                    std::span<const ClassId> labels,
                                                    std::span<const Real> class_weights) {
  if (logits.rank() != 2) {
    throw ShapeError("cross_entropy: logits must be [N_items, N_classes], got " +
                     shape_string(logits.shape()));
  }
  const Index items = logits.dim(0);
  const Index classes = logits.dim(1);
  if (static_cast<Index>(labels.size()) != items) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(items) + " items");
  }
  if (static_cast<Index>(class_weights.size()) != classes) {
    throw ShapeError("cross_entropy: " + std::to_string(class_weights.size()) +
                     " class weights for " + std::to_string(classes) + " classes");
  }
  for (const auto w : class_weights) {
    if (!(w > 0.0)) throw std::invalid_argument("cross_entropy: class weights must be positive");
  }

  const Real* x = logits.data().data();
  Real total = 0.0;
  Real weight_sum = 0.0;
  // Softmax per annotated row, kept for the backward pass.
  std::vector<Real> probs;
  std::vector<Index> rows;
  for (Index i = 0; i < items; ++i) {
    const ClassId y = labels[static_cast<std::size_t>(i)];
    if (!is_annotated(y)) continue;
    if (y >= classes) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(y) + " out of range");
    }
    const Real* row = x + i * classes;
    const Real m = *std::max_element(row, row + classes);
    Real denom = 0.0;
    for (Index k = 0; k < classes; ++k) denom += std::exp(row[k] - m);
    const Real log_denom = std::log(denom);
    const Real w = class_weights[y];
    total += w * (log_denom - (row[y] - m));
    weight_sum += w;
    for (Index k = 0; k < classes; ++k) probs.push_back(std::exp(row[k] - m - log_denom));
    rows.push_back(i);
  }
  if (rows.empty()) return std::nullopt;

  Tensor out = Tensor::scalar(total / weight_sum);
  out.set_requires_grad(logits.requires_grad());
  std::vector<ClassId> kept_labels;
  kept_labels.reserve(rows.size());
  for (const auto r : rows) kept_labels.push_back(labels[static_cast<std::size_t>(r)]);
  std::vector<Real> weights(class_weights.begin(), class_weights.end());
  record_op(graph, "cross_entropy", out,
            [out, logits = logits, classes, weight_sum, probs = std::move(probs), rows = std::move(rows), kept_labels = std::move(kept_labels), weights = std::move(weights)]() mutable {
              const Real g = out.grad()[0];
              Real* gx = logits.ensure_grad().data();
              for (std::size_t n = 0; n < rows.size(); ++n) {
                const ClassId y = kept_labels[n];
                const Real coef = g * weights[y] / weight_sum;
                Real* grow = gx + rows[n] * classes;
                const Real* p = probs.data() + n * static_cast<std::size_t>(classes);
                for (Index k = 0; k < classes; ++k) {
                  grow[k] += coef * (p[k] - (k == y ? 1.0 : 0.0));
                }
              }
            });
  return out;
}

}  // namespace vv::ops
