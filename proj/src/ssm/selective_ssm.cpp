// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "ssm/selective_ssm.hpp"

#include <cmath>

#include "numerics/kernels.hpp"
#include "ssm/parallel_scan.hpp"

namespace sipm::ssm {
namespace {

template <typename S>
Tensor<S> uniform(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<S> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(dist(rng));
  return t;
}

template <typename S>
Tensor<S> delta_from(const Tensor<S>& x, const SelectiveSsmParams<S>& p) {
  const Tensor<S> low = kernels::matmul(kernels::matmul(x, p.w_delta_down), p.w_delta_up);
  return kernels::softplus(kernels::add(low, p.delta_bias));
}

template <typename S>
void require_finite(const Tensor<S>& t, const std::string& what) {
  if (!t.all_finite()) throw NumericError(what + ": non-finite values " + tensor_summary(t));
}

}  // namespace

template <typename S>
Tensor<S> SelectiveSsmParams<S>::a() const {
  return kernels::scale(kernels::exp(a_log), S(-1));
}

template <typename S>
void SelectiveSsmParams<S>::validate() const {
  if (a_log.rank() != 2) throw ShapeError("ssm: a_log must be D_inner x N, got " + shape_str(a_log.shape()));
  const std::size_t d = inner(), n = state();
  if (w_delta_down.rank() != 2) throw ShapeError("ssm: w_delta_down must be rank 2");
  const std::size_t r = rank();
  require_shape(w_b, Shape{d, n}, "ssm w_b");
  require_shape(w_c, Shape{d, n}, "ssm w_c");
  require_shape(w_delta_down, Shape{d, r}, "ssm w_delta_down");
  require_shape(w_delta_up, Shape{r, d}, "ssm w_delta_up");
  require_shape(delta_bias, Shape{d}, "ssm delta_bias");
  require_shape(d_skip, Shape{d}, "ssm d_skip");
}

template <typename S>
SelectiveSsmParams<S> SelectiveSsmParams<S>::init(std::size_t inner, std::size_t state,
                                                  std::size_t rank, std::mt19937_64& rng) {
  SelectiveSsmParams p;
  p.a_log = Tensor<S>(Shape{inner, state});
  for (std::size_t d = 0; d < inner; ++d)
    for (std::size_t n = 0; n < state; ++n) p.a_log.at(d, n) = static_cast<S>(std::log(double(n + 1)));
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(inner));
  p.w_b = uniform<S>(Shape{inner, state}, in_bound, rng);
  p.w_c = uniform<S>(Shape{inner, state}, in_bound, rng);
  p.w_delta_down = uniform<S>(Shape{inner, rank}, in_bound, rng);
  p.w_delta_up = uniform<S>(Shape{rank, inner}, 1.0 / std::sqrt(static_cast<double>(rank)), rng);
  p.delta_bias = Tensor<S>(Shape{inner});
  std::uniform_real_distribution<double> log_dt(std::log(1e-3), std::log(0.1));
  for (std::size_t d = 0; d < inner; ++d) {
    const double dt = std::exp(log_dt(rng));
    p.delta_bias[d] = static_cast<S>(dt + std::log(-std::expm1(-dt)));  // softplus^-1(dt)
  }
  p.d_skip = Tensor<S>(Shape{inner}, S(1));
  return p;
}

template <typename S>
SelectiveStep<S> selective_params(const Tensor<S>& x_t, const SelectiveSsmParams<S>& params) {
  params.validate();
  require_shape(x_t, Shape{params.inner()}, "selective_params x_t");
  require_finite(x_t, "selective_params input");
  const Tensor<S> row = x_t.reshaped(Shape{1, params.inner()});
  SelectiveStep<S> s;
  s.b = kernels::matmul(row, params.w_b).reshaped(Shape{params.state()});
  s.c = kernels::matmul(row, params.w_c).reshaped(Shape{params.state()});
  s.delta = delta_from(row, params).reshaped(Shape{params.inner()});
  return s;
}

template <typename S>
Discretized<S> discretize(const Tensor<S>& a_row, const Tensor<S>& b_t, S delta) {
  if (!(delta > S(0))) {
    throw UsageError("discretize: delta must be positive, got " + std::to_string(delta));
  }
  if (a_row.shape() != b_t.shape()) {
    throw ShapeError("discretize: A row " + shape_str(a_row.shape()) + " vs B " +
                     shape_str(b_t.shape()));
  }
  Discretized<S> r{Tensor<S>(a_row.shape()), Tensor<S>(b_t.shape())};
  for (std::size_t n = 0; n < a_row.size(); ++n) {
    r.a_bar[n] = std::exp(delta * a_row[n]);
    r.b_bar[n] = delta * b_t[n];
  }
  return r;
}

template <typename S>
StepResult<S> ssm_step(const HiddenState<S>& h_prev, const Tensor<S>& x_t,
                       const SelectiveSsmParams<S>& params, std::size_t step) {
  const std::size_t inner = params.inner(), state = params.state();
  require_shape(h_prev.h, Shape{inner, state}, "ssm_step state");
  const SelectiveStep<S> sel = selective_params(x_t, params);
  const Tensor<S> a = params.a();
  StepResult<S> r{HiddenState<S>{Tensor<S>(Shape{inner, state})}, Tensor<S>(Shape{inner})};
  Tensor<S> a_row(Shape{state});
  for (std::size_t d = 0; d < inner; ++d) {
    for (std::size_t n = 0; n < state; ++n) a_row[n] = a.at(d, n);
    const Discretized<S> disc = discretize(a_row, sel.b, sel.delta[d]);
    S acc = 0;
    for (std::size_t n = 0; n < state; ++n) {
      const S h = disc.a_bar[n] * h_prev.h.at(d, n) + disc.b_bar[n] * x_t[d];
      r.h.h.at(d, n) = h;
      acc += sel.c[n] * h;
    }
    r.y[d] = params.use_d_skip ? acc + params.d_skip[d] * x_t[d] : acc;
  }
  if (!r.h.h.all_finite() || !r.y.all_finite()) {
    throw NumericError("ssm_step: non-finite state at step " + std::to_string(step));
  }
  return r;
}

template <typename S>
void validate(const ScanOperands<S>& ops) {
  if (ops.u.rank() != 2 || ops.u.dim(0) == 0) {
    throw ShapeError("scan: input must be T x D with T >= 1, got " + shape_str(ops.u.shape()));
  }
  const std::size_t t_len = ops.u.dim(0), d = ops.u.dim(1);
  if (ops.a.rank() != 2 || ops.a.dim(0) != d) {
    throw ShapeError("scan: A " + shape_str(ops.a.shape()) + " does not match input " +
                     shape_str(ops.u.shape()));
  }
  const std::size_t n = ops.a.dim(1);
  require_shape(ops.delta, Shape{t_len, d}, "scan delta");
  require_shape(ops.b, Shape{t_len, n}, "scan B");
  require_shape(ops.c, Shape{t_len, n}, "scan C");
  if (ops.d_skip) require_shape(*ops.d_skip, Shape{d}, "scan d_skip");
}

template <typename S>
Tensor<S> scan_kernel_sequential(const ScanOperands<S>& ops, std::vector<S>* states) {
  validate(ops);
  const std::size_t t_len = ops.u.dim(0), dim = ops.u.dim(1), n_state = ops.a.dim(1);
  Tensor<S> y(Shape{t_len, dim});
  std::vector<S> h(dim * n_state, S(0));
  if (states) states->assign(t_len * dim * n_state, S(0));
  for (std::size_t t = 0; t < t_len; ++t) {
    const S* b = ops.b.ptr() + t * n_state;
    const S* c = ops.c.ptr() + t * n_state;
    for (std::size_t d = 0; d < dim; ++d) {
      const S dt = ops.delta[t * dim + d];
      const S ut = ops.u[t * dim + d];
      const S* a = ops.a.ptr() + d * n_state;
      S* hd = h.data() + d * n_state;
      S acc = 0;
      for (std::size_t n = 0; n < n_state; ++n) {
        hd[n] = std::exp(dt * a[n]) * hd[n] + (dt * b[n]) * ut;
        acc += c[n] * hd[n];
      }
      y[t * dim + d] = ops.d_skip ? acc + (*ops.d_skip)[d] * ut : acc;
    }
    for (S v : h) {
      if (!std::isfinite(v)) {
        throw NumericError("scan: non-finite state at step " + std::to_string(t));
      }
    }
    if (states) std::copy(h.begin(), h.end(), states->begin() + static_cast<std::ptrdiff_t>(t * dim * n_state));
  }
  return y;
}

template <typename S>
Tensor<S> scan_kernel_parallel(const ScanOperands<S>& ops, std::vector<S>* states) {
  validate(ops);
  const std::size_t t_len = ops.u.dim(0), dim = ops.u.dim(1), n_state = ops.a.dim(1);
  std::vector<S> all(t_len * dim * n_state);
  std::vector<AffinePair<S>> elems(t_len);
  // Channels are independent; each runs its own fixed combination tree.
  for (std::size_t d = 0; d < dim; ++d) {
    for (std::size_t n = 0; n < n_state; ++n) {
      const S a = ops.a.at(d, n);
      for (std::size_t t = 0; t < t_len; ++t) {
        const S dt = ops.delta[t * dim + d];
        elems[t] = {std::exp(dt * a), (dt * ops.b[t * n_state + n]) * ops.u[t * dim + d]};
      }
      const auto prefix = affine_inclusive_scan(elems);
      for (std::size_t t = 0; t < t_len; ++t) all[(t * dim + d) * n_state + n] = prefix[t].b;
    }
  }
  Tensor<S> y(Shape{t_len, dim});
  for (std::size_t t = 0; t < t_len; ++t) {
    const S* c = ops.c.ptr() + t * n_state;
    for (std::size_t d = 0; d < dim; ++d) {
      const S* hd = all.data() + (t * dim + d) * n_state;
      S acc = 0;
      for (std::size_t n = 0; n < n_state; ++n) acc += c[n] * hd[n];
      const S ut = ops.u[t * dim + d];
      y[t * dim + d] = ops.d_skip ? acc + (*ops.d_skip)[d] * ut : acc;
    }
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!std::isfinite(all[i])) {
      throw NumericError("scan: non-finite state at step " + std::to_string(i / (dim * n_state)));
    }
  }
  if (states) *states = std::move(all);
  return y;
}

template <typename S>
ScanGradients<S> scan_kernel_backward(const ScanOperands<S>& ops, const std::vector<S>& states,
                                      const Tensor<S>& grad_y) {
  validate(ops);
  const std::size_t t_len = ops.u.dim(0), dim = ops.u.dim(1), n_state = ops.a.dim(1);
  require_shape(grad_y, ops.u.shape(), "scan grad_y");
  ScanGradients<S> g{Tensor<S>(ops.u.shape()),      Tensor<S>(ops.delta.shape()),
                     Tensor<S>(ops.a.shape()),      Tensor<S>(ops.b.shape()),
                     Tensor<S>(ops.c.shape()),      Tensor<S>(Shape{dim})};
  // Adjoint of h_t flowing back from step t+1, already multiplied by a_{t+1}.
  std::vector<S> carry(dim * n_state, S(0));
  for (std::size_t t = t_len; t-- > 0;) {
    const S* b = ops.b.ptr() + t * n_state;
    const S* c = ops.c.ptr() + t * n_state;
    const S* h_now = states.data() + t * dim * n_state;
    const S* h_prev = t > 0 ? states.data() + (t - 1) * dim * n_state : nullptr;
    for (std::size_t d = 0; d < dim; ++d) {
      const S dt = ops.delta[t * dim + d];
      const S ut = ops.u[t * dim + d];
      const S gy = grad_y[t * dim + d];
      const S* a = ops.a.ptr() + d * n_state;
      S g_delta = 0, g_u = 0;
      for (std::size_t n = 0; n < n_state; ++n) {
        const std::size_t k = d * n_state + n;
        const S hp = h_prev ? h_prev[k] : S(0);
        const S abar = std::exp(dt * a[n]);
        g.c[t * n_state + n] += gy * h_now[k];
        const S gh = carry[k] + gy * c[n];
        const S ga = gh * hp;
        g_delta += ga * abar * a[n] + gh * b[n] * ut;
        g.a[k] += ga * abar * dt;
        g.b[t * n_state + n] += gh * dt * ut;
        g_u += gh * dt * b[n];
        carry[k] = gh * abar;
      }
      g.delta[t * dim + d] = g_delta;
      if (ops.d_skip) {
        g_u += gy * (*ops.d_skip)[d];
        g.d_skip[d] += gy * ut;
      }
      g.u[t * dim + d] = g_u;
    }
  }
  return g;
}

template <typename S>
Var<S> selective_scan(const Var<S>& u, const Var<S>& delta, const Var<S>& a, const Var<S>& b,
                      const Var<S>& c, const Var<S>& d_skip, ScanMode mode) {
  const bool with_skip = d_skip.defined();
  const ScanOperands<S> ops{u.value(), delta.value(), a.value(), b.value(), c.value(),
                            with_skip ? &d_skip.value() : nullptr};
  Tape<S>* tape = with_skip ? common_tape<S>({&u, &delta, &a, &b, &c, &d_skip}, "selective_scan")
                            : common_tape<S>({&u, &delta, &a, &b, &c}, "selective_scan");
  auto states = tape ? std::make_shared<std::vector<S>>() : nullptr;
  Tensor<S> y = mode == ScanMode::kParallel ? scan_kernel_parallel(ops, states.get())
                                            : scan_kernel_sequential(ops, states.get());
  auto yv = std::make_shared<const Tensor<S>>(std::move(y));
  check_finite<S>("selective_scan", *yv, {&u, &delta, &a, &b, &c});
  if (!tape) return Var<S>::constant(yv);
  auto uv = u.shared(), dv = delta.shared(), av = a.shared(), bv = b.shared(), cv = c.shared();
  auto sv = with_skip ? d_skip.shared() : nullptr;
  const std::size_t ids[6] = {u.id(), delta.id(), a.id(), b.id(), c.id(),
                              with_skip ? d_skip.id() : kNoId};
  return tape->record("selective_scan", yv,
                      [=](const Tensor<S>& g, Tape<S>& t) {
                        const ScanOperands<S> o{*uv, *dv, *av, *bv, *cv, sv.get()};
                        ScanGradients<S> gr = scan_kernel_backward(o, *states, g);
                        t.accumulate(ids[0], std::move(gr.u));
                        t.accumulate(ids[1], std::move(gr.delta));
                        t.accumulate(ids[2], std::move(gr.a));
                        t.accumulate(ids[3], std::move(gr.b));
                        t.accumulate(ids[4], std::move(gr.c));
                        t.accumulate(ids[5], std::move(gr.d_skip));
                      });
}

namespace {

template <typename S>
Tensor<S> scan_full(const Tensor<S>& x, const SelectiveSsmParams<S>& params, ScanMode mode) {
  params.validate();
  if (x.rank() != 2 || x.dim(1) != params.inner() || x.dim(0) == 0) {
    throw ShapeError("scan: input " + shape_str(x.shape()) + " for D_inner " +
                     std::to_string(params.inner()) + " (need T >= 1)");
  }
  require_finite(x, "scan input");
  const Tensor<S> b = kernels::matmul(x, params.w_b);
  const Tensor<S> c = kernels::matmul(x, params.w_c);
  const Tensor<S> delta = delta_from(x, params);
  const Tensor<S> a = params.a();
  const ScanOperands<S> ops{x, delta, a, b, c, params.use_d_skip ? &params.d_skip : nullptr};
  return mode == ScanMode::kParallel ? scan_kernel_parallel(ops) : scan_kernel_sequential(ops);
}

}  // namespace

template <typename S>
Tensor<S> scan_sequential(const Tensor<S>& x, const SelectiveSsmParams<S>& params) {
  return scan_full(x, params, ScanMode::kSequential);
}

template <typename S>
Tensor<S> scan_parallel(const Tensor<S>& x, const SelectiveSsmParams<S>& params) {
  return scan_full(x, params, ScanMode::kParallel);
}

#define SIPM_INSTANTIATE_SSM(S)                                                               \
  template struct SelectiveSsmParams<S>;                                                      \
  template SelectiveStep<S> selective_params(const Tensor<S>&, const SelectiveSsmParams<S>&); \
  template Discretized<S> discretize(const Tensor<S>&, const Tensor<S>&, S);                  \
  template StepResult<S> ssm_step(const HiddenState<S>&, const Tensor<S>&,                   \
                                  const SelectiveSsmParams<S>&, std::size_t);                 \
  template Tensor<S> scan_sequential(const Tensor<S>&, const SelectiveSsmParams<S>&);         \
  template Tensor<S> scan_parallel(const Tensor<S>&, const SelectiveSsmParams<S>&);           \
  template void validate(const ScanOperands<S>&);                                             \
  template Tensor<S> scan_kernel_sequential(const ScanOperands<S>&, std::vector<S>*);         \
  template Tensor<S> scan_kernel_parallel(const ScanOperands<S>&, std::vector<S>*);           \
  template ScanGradients<S> scan_kernel_backward(const ScanOperands<S>&,                      \
                                                 const std::vector<S>&, const Tensor<S>&);    \
  template Var<S> selective_scan(const Var<S>&, const Var<S>&, const Var<S>&, const Var<S>&,  \
                                 const Var<S>&, const Var<S>&, ScanMode);

SIPM_INSTANTIATE_SSM(float)
SIPM_INSTANTIATE_SSM(double)
#undef SIPM_INSTANTIATE_SSM

}  // namespace sipm::ssm
