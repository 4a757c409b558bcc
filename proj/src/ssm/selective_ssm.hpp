// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <random>
#include <vector>

#include "numerics/autodiff.hpp"
#include "numerics/tensor.hpp"

namespace sipm::ssm {

enum class ScanMode { kSequential, kParallel };

// Input-dependent (selective) SSM over D_inner channels with state size N.
// Projections are stored input-major so that row vectors multiply on the left:
// B_t = x_t * w_b, C_t = x_t * w_c, delta_t = softplus(x_t * w_delta_down *
// w_delta_up + delta_bias).
template <typename S>
struct SelectiveSsmParams {
  Tensor<S> a_log;         // D_inner x N, A = -exp(a_log) < 0
  Tensor<S> w_b;           // D_inner x N
  Tensor<S> w_c;           // D_inner x N
  Tensor<S> w_delta_down;  // D_inner x rank
  Tensor<S> w_delta_up;    // rank x D_inner
  Tensor<S> delta_bias;    // D_inner
  Tensor<S> d_skip;        // D_inner
  bool use_d_skip = true;

  std::size_t inner() const { return a_log.dim(0); }
  std::size_t state() const { return a_log.dim(1); }
  std::size_t rank() const { return w_delta_down.dim(1); }

  Tensor<S> a() const;
  // Throws ShapeError on inconsistent dimensions.
  void validate() const;

  // a_log = log(1..N) per channel; delta bias set so softplus(bias) is
  // log-uniform in [1e-3, 0.1]; projections uniform in +-1/sqrt(fan_in).
  static SelectiveSsmParams init(std::size_t inner, std::size_t state, std::size_t rank,
                                 std::mt19937_64& rng);
};

template <typename S>
struct SelectiveStep {
  Tensor<S> b;      // N
  Tensor<S> c;      // N
  Tensor<S> delta;  // D_inner, strictly positive
};

template <typename S>
SelectiveStep<S> selective_params(const Tensor<S>& x_t, const SelectiveSsmParams<S>& params);

template <typename S>
struct Discretized {
  Tensor<S> a_bar;  // exp(delta * A_row)
  Tensor<S> b_bar;  // delta * B_t
};

// Zero-order hold on A, Euler on B: (exp(delta A), delta B).
template <typename S>
Discretized<S> discretize(const Tensor<S>& a_row, const Tensor<S>& b_t, S delta);

template <typename S>
struct HiddenState {
  Tensor<S> h;  // D_inner x N

  static HiddenState zeros(std::size_t inner, std::size_t state) {
    return {Tensor<S>(Shape{inner, state})};
  }
  std::size_t bytes() const { return h.size() * sizeof(S); }
};

template <typename S>
struct StepResult {
  HiddenState<S> h;
  Tensor<S> y;  // D_inner
};

// One recurrence step. `step` only labels errors.
template <typename S>
StepResult<S> ssm_step(const HiddenState<S>& h_prev, const Tensor<S>& x_t,
                       const SelectiveSsmParams<S>& params, std::size_t step = 0);

// x: T x D_inner, zero initial state.
template <typename S>
Tensor<S> scan_sequential(const Tensor<S>& x, const SelectiveSsmParams<S>& params);
template <typename S>
Tensor<S> scan_parallel(const Tensor<S>& x, const SelectiveSsmParams<S>& params);

// Discretized-scan kernel shared by the direct and the differentiable paths.
// u, delta: T x D; a: D x N; b, c: T x N; d_skip: D or empty.
template <typename S>
struct ScanOperands {
  const Tensor<S>& u;
  const Tensor<S>& delta;
  const Tensor<S>& a;
  const Tensor<S>& b;
  const Tensor<S>& c;
  const Tensor<S>* d_skip;
};

template <typename S>
void validate(const ScanOperands<S>& ops);

// If `states` is non-null it receives every h_t (T x D x N, row-major).
template <typename S>
Tensor<S> scan_kernel_sequential(const ScanOperands<S>& ops, std::vector<S>* states = nullptr);
template <typename S>
Tensor<S> scan_kernel_parallel(const ScanOperands<S>& ops, std::vector<S>* states = nullptr);

template <typename S>
struct ScanGradients {
  Tensor<S> u, delta, a, b, c, d_skip;
};

// Reverse-time adjoint of the recurrence given all forward states.
template <typename S>
ScanGradients<S> scan_kernel_backward(const ScanOperands<S>& ops, const std::vector<S>& states,
                                      const Tensor<S>& grad_y);

// Differentiable selective scan. d_skip may be an undefined Var to drop the
// residual term.
template <typename S>
Var<S> selective_scan(const Var<S>& u, const Var<S>& delta, const Var<S>& a, const Var<S>& b,
                      const Var<S>& c, const Var<S>& d_skip, ScanMode mode);

}  // namespace sipm::ssm
