// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "numerics/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sipm::kernels {
namespace {

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

enum class Broadcast { kSame, kRow, kScalar };

Broadcast broadcast_kind(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return Broadcast::kSame;
  if (shape_size(b) == 1) return Broadcast::kScalar;
  if (b.size() == 1 && !a.empty() && a.back() == b[0]) return Broadcast::kRow;
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(b) + " onto " + shape_str(a));
}

template <typename S, typename F>
Tensor<S> binary(const Tensor<S>& a, const Tensor<S>& b, const char* op, F f) {
  Tensor<S> out(a.shape());
  const S* pa = a.ptr();
  const S* pb = b.ptr();
  S* po = out.ptr();
  const std::size_t n = a.size();
  switch (broadcast_kind(a.shape(), b.shape(), op)) {
    case Broadcast::kSame:
      for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
      break;
    case Broadcast::kScalar: {
      const S v = pb[0];
      for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], v);
      break;
    }
    case Broadcast::kRow: {
      const std::size_t w = b.size();
      for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i % w]);
      break;
    }
  }
  return out;
}

template <typename S, typename F>
Tensor<S> unary(const Tensor<S>& x, F f) {
  Tensor<S> out(x.shape());
  const S* px = x.ptr();
  S* po = out.ptr();
  for (std::size_t i = 0; i < x.size(); ++i) po[i] = f(px[i]);
  return out;
}

}  // namespace

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k_total = a.dim(1), n = b.dim(1);
  Tensor<S> c(Shape{m, n});
  // Column/depth tiling keeps the B tile cache resident. Each output element
  // still accumulates over k in ascending order.
  constexpr std::size_t kBlockN = 256;
  constexpr std::size_t kBlockK = 128;
  const S* pa = a.ptr();
  const S* pb = b.ptr();
  S* pc = c.ptr();
  for (std::size_t j0 = 0; j0 < n; j0 += kBlockN) {
    const std::size_t jn = std::min(kBlockN, n - j0);
    for (std::size_t k0 = 0; k0 < k_total; k0 += kBlockK) {
      const std::size_t kn = std::min(kBlockK, k_total - k0);
      for (std::size_t i = 0; i < m; ++i) {
        S* crow = pc + i * n + j0;
        const S* arow = pa + i * k_total;
        for (std::size_t k = k0; k < k0 + kn; ++k) {
          const S aik = arow[k];
          const S* brow = pb + k * n + j0;
          for (std::size_t j = 0; j < jn; ++j) crow[j] += aik * brow[j];
        }
      }
    }
  }
  return c;
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  if (a.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor<S> out(Shape{c, r});
  constexpr std::size_t kTile = 32;
  for (std::size_t i0 = 0; i0 < r; i0 += kTile) {
    for (std::size_t j0 = 0; j0 < c; j0 += kTile) {
      const std::size_t i1 = std::min(r, i0 + kTile), j1 = std::min(c, j0 + kTile);
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) out[j * r + i] = a[i * c + j];
      }
    }
  }
  return out;
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  return binary(a, b, "add", [](S x, S y) { return x + y; });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  return binary(a, b, "mul", [](S x, S y) { return x * y; });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S s) {
  return unary(a, [s](S x) { return x * s; });
}

template <typename S>
Tensor<S> reduce_to(const Tensor<S>& g, const Shape& shape) {
  if (g.shape() == shape) return g;
  if (shape_size(shape) == 1) {
    return Tensor<S>(shape, sum_all(g));
  }
  if (shape.size() == 1 && !g.shape().empty() && g.shape().back() == shape[0]) {
    Tensor<S> out(shape);
    const std::size_t w = shape[0];
    for (std::size_t i = 0; i < g.size(); ++i) out[i % w] += g[i];
    return out;
  }
  throw ShapeError("reduce_to: cannot reduce " + shape_str(g.shape()) + " to " + shape_str(shape));
}

template <typename S>
S softplus(S x) {
  return x > S(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename S>
S sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <typename S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x / std::numbers::sqrt2_v<S>));
}

template <typename S>
Tensor<S> exp(const Tensor<S>& x) {
  return unary(x, [](S v) { return std::exp(v); });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
  return unary(x, [](S v) { return sigmoid(v); });
}

template <typename S>
Tensor<S> softplus(const Tensor<S>& x) {
  return unary(x, [](S v) { return softplus(v); });
}

template <typename S>
Tensor<S> tanh(const Tensor<S>& x) {
  return unary(x, [](S v) { return std::tanh(v); });
}

template <typename S>
Tensor<S> silu(const Tensor<S>& x) {
  return unary(x, [](S v) { return v * sigmoid(v); });
}

template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
  return unary(x, [](S v) { return gelu(v); });
}

template <typename S>
Tensor<S> softmax_last(const Tensor<S>& x) {
  if (x.rank() == 0 || x.empty()) throw ShapeError("softmax: empty input");
  const std::size_t w = x.shape().back();
  const std::size_t rows = x.size() / w;
  Tensor<S> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const S* in = x.ptr() + r * w;
    S* o = out.ptr() + r * w;
    S mx = in[0];
    for (std::size_t j = 1; j < w; ++j) mx = std::max(mx, in[j]);
    S sum = 0;
    for (std::size_t j = 0; j < w; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    const S inv = S(1) / sum;
    for (std::size_t j = 0; j < w; ++j) o[j] *= inv;
  }
  return out;
}

template <typename S>
LayerNormResult<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                              S eps) {
  if (x.rank() == 0 || x.empty()) throw ShapeError("layer_norm: empty input");
  const std::size_t w = x.shape().back();
  require_shape(gamma, Shape{w}, "layer_norm gamma");
  require_shape(beta, Shape{w}, "layer_norm beta");
  const std::size_t rows = x.size() / w;
  LayerNormResult<S> r{Tensor<S>(x.shape()), Tensor<S>(x.shape()), std::vector<S>(rows)};
  for (std::size_t i = 0; i < rows; ++i) {
    const S* in = x.ptr() + i * w;
    S mean = 0;
    for (std::size_t j = 0; j < w; ++j) mean += in[j];
    mean /= static_cast<S>(w);
    S var = 0;
    for (std::size_t j = 0; j < w; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<S>(w);
    const S inv = S(1) / std::sqrt(var + eps);
    r.inv_std[i] = inv;
    S* xh = r.xhat.ptr() + i * w;
    S* y = r.y.ptr() + i * w;
    for (std::size_t j = 0; j < w; ++j) {
      xh[j] = (in[j] - mean) * inv;
      y[j] = xh[j] * gamma[j] + beta[j];
    }
  }
  return r;
}

template <typename S>
Tensor<S> mean_axis(const Tensor<S>& x, std::size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis, "mean");
  if (s.n == 0) throw ShapeError("mean: empty axis in " + shape_str(x.shape()));
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  Tensor<S> out(out_shape);
  const S inv = S(1) / static_cast<S>(s.n);
  for (std::size_t o = 0; o < s.outer; ++o) {
    S* dst = out.ptr() + o * s.inner;
    for (std::size_t k = 0; k < s.n; ++k) {
      const S* src = x.ptr() + (o * s.n + k) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
    for (std::size_t i = 0; i < s.inner; ++i) dst[i] *= inv;
  }
  return out;
}

template <typename S>
S sum_all(const Tensor<S>& x) {
  S acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
  return acc;
}

template <typename S>
Tensor<S> concat(const std::vector<const Tensor<S>*>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape out_shape = parts.front()->shape();
  split_at(out_shape, axis, "concat");
  std::size_t total = 0;
  for (const auto* p : parts) {
    Shape a = p->shape(), b = out_shape;
    if (a.size() != b.size()) {
      throw ShapeError("concat: rank mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
    a[axis] = b[axis] = 0;
    if (a != b) {
      throw ShapeError("concat: shape mismatch " + shape_str(p->shape()) + " vs " +
                       shape_str(out_shape));
    }
    total += p->shape()[axis];
  }
  out_shape[axis] = total;
  Tensor<S> out(out_shape);
  const AxisSplit s = split_at(out_shape, axis, "concat");
  std::size_t offset = 0;
  for (const auto* p : parts) {
    const std::size_t n = p->shape()[axis];
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(p->ptr() + o * n * s.inner, n * s.inner,
                  out.ptr() + (o * s.n + offset) * s.inner);
    }
    offset += n;
  }
  return out;
}

template <typename S>
Tensor<S> flip(const Tensor<S>& x, std::size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis, "flip");
  Tensor<S> out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < s.n; ++k) {
      std::copy_n(x.ptr() + (o * s.n + k) * s.inner, s.inner,
                  out.ptr() + (o * s.n + (s.n - 1 - k)) * s.inner);
    }
  }
  return out;
}

template <typename S>
Tensor<S> slice(const Tensor<S>& x, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisSplit s = split_at(x.shape(), axis, "slice");
  if (start + length > s.n || length == 0) {
    throw ShapeError("slice: [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") on axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  Tensor<S> out(out_shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.ptr() + (o * s.n + start) * s.inner, length * s.inner,
                out.ptr() + o * length * s.inner);
  }
  return out;
}

template <typename S>
Tensor<S> unslice(const Tensor<S>& g, const Shape& full, std::size_t axis, std::size_t start) {
  const AxisSplit s = split_at(full, axis, "unslice");
  const std::size_t length = g.shape()[axis];
  Tensor<S> out(full);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(g.ptr() + o * length * s.inner, length * s.inner,
                out.ptr() + (o * s.n + start) * s.inner);
  }
  return out;
}

template <typename S>
Tensor<S> causal_conv1d(const Tensor<S>& x, const Tensor<S>& w) {
  if (x.rank() != 2 || w.rank() != 2 || w.dim(0) != x.dim(1)) {
    throw ShapeError("causal_conv1d: input " + shape_str(x.shape()) + " with kernel " +
                     shape_str(w.shape()));
  }
  const std::size_t t_len = x.dim(0), ch = x.dim(1), k_len = w.dim(1);
  Tensor<S> y(x.shape());
  for (std::size_t t = 0; t < t_len; ++t) {
    S* yr = y.ptr() + t * ch;
    for (std::size_t k = 0; k < k_len; ++k) {
      const std::size_t lag = k_len - 1 - k;
      if (lag > t) continue;
      const S* xr = x.ptr() + (t - lag) * ch;
      for (std::size_t c = 0; c < ch; ++c) yr[c] += w[c * k_len + k] * xr[c];
    }
  }
  return y;
}

#define SIPM_INSTANTIATE_KERNELS(S)                                                          \
  template Tensor<S> matmul(const Tensor<S>&, const Tensor<S>&);                             \
  template Tensor<S> transpose(const Tensor<S>&);                                            \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                                \
  template Tensor<S> scale(const Tensor<S>&, S);                                             \
  template Tensor<S> reduce_to(const Tensor<S>&, const Shape&);                              \
  template S softplus(S);                                                                    \
  template S sigmoid(S);                                                                     \
  template S gelu(S);                                                                        \
  template Tensor<S> exp(const Tensor<S>&);                                                  \
  template Tensor<S> sigmoid(const Tensor<S>&);                                              \
  template Tensor<S> softplus(const Tensor<S>&);                                             \
  template Tensor<S> tanh(const Tensor<S>&);                                                 \
  template Tensor<S> silu(const Tensor<S>&);                                                 \
  template Tensor<S> gelu(const Tensor<S>&);                                                 \
  template Tensor<S> softmax_last(const Tensor<S>&);                                         \
  template LayerNormResult<S> layer_norm(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, \
                                         S);                                                 \
  template Tensor<S> mean_axis(const Tensor<S>&, std::size_t);                               \
  template S sum_all(const Tensor<S>&);                                                      \
  template Tensor<S> concat(const std::vector<const Tensor<S>*>&, std::size_t);              \
  template Tensor<S> flip(const Tensor<S>&, std::size_t);                                    \
  template Tensor<S> slice(const Tensor<S>&, std::size_t, std::size_t, std::size_t);         \
  template Tensor<S> unslice(const Tensor<S>&, const Shape&, std::size_t, std::size_t);      \
  template Tensor<S> causal_conv1d(const Tensor<S>&, const Tensor<S>&);

SIPM_INSTANTIATE_KERNELS(float)
SIPM_INSTANTIATE_KERNELS(double)

#undef SIPM_INSTANTIATE_KERNELS

}  // namespace sipm::kernels
