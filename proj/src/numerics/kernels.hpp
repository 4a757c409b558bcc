// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <vector>

#include "numerics/tensor.hpp"

// Value-level kernels. These do no tape bookkeeping; the differentiable
// wrappers in autodiff.hpp build on them. All reductions run left to right
// in index order so results are bit-reproducible.
namespace sipm::kernels {

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> transpose(const Tensor<S>& a);

// Broadcasting rule for binary elementwise ops: b has the same shape as a,
// or b is rank 1 with length a.shape().back(), or b holds a single value.
template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> scale(const Tensor<S>& a, S s);
// Sums g down to `shape` following the broadcasting rule above.
template <typename S>
Tensor<S> reduce_to(const Tensor<S>& g, const Shape& shape);

template <typename S>
S softplus(S x);
template <typename S>
S sigmoid(S x);
template <typename S>
S gelu(S x);

template <typename S>
Tensor<S> exp(const Tensor<S>& x);
template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x);
template <typename S>
Tensor<S> softplus(const Tensor<S>& x);
template <typename S>
Tensor<S> tanh(const Tensor<S>& x);
template <typename S>
Tensor<S> silu(const Tensor<S>& x);
template <typename S>
Tensor<S> gelu(const Tensor<S>& x);

template <typename S>
Tensor<S> softmax_last(const Tensor<S>& x);

template <typename S>
struct LayerNormResult {
  Tensor<S> y;
  Tensor<S> xhat;            // normalized input, before affine
  std::vector<S> inv_std;    // one per row
};
// Normalizes over the last axis, then applies gamma/beta (length = last dim).
template <typename S>
LayerNormResult<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma,
                              const Tensor<S>& beta, S eps);

// Mean over `axis`; the reduced axis is kept with length 1.
template <typename S>
Tensor<S> mean_axis(const Tensor<S>& x, std::size_t axis);
template <typename S>
S sum_all(const Tensor<S>& x);

template <typename S>
Tensor<S> concat(const std::vector<const Tensor<S>*>& parts, std::size_t axis);
template <typename S>
Tensor<S> flip(const Tensor<S>& x, std::size_t axis);
template <typename S>
Tensor<S> slice(const Tensor<S>& x, std::size_t axis, std::size_t start, std::size_t length);
// Writes g (shaped like the slice) into a zero tensor shaped `full` at `start`.
template <typename S>
Tensor<S> unslice(const Tensor<S>& g, const Shape& full, std::size_t axis, std::size_t start);

// Depthwise causal 1-D convolution. x: T x C, w: C x K.
// y[t,c] = sum_k w[c,k] * x[t-(K-1)+k, c], frames before 0 read as zero.
template <typename S>
Tensor<S> causal_conv1d(const Tensor<S>& x, const Tensor<S>& w);

}  // namespace sipm::kernels
