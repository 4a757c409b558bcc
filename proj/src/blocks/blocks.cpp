// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "blocks/blocks.hpp"

#include <cmath>

#include "numerics/kernels.hpp"

namespace sipm::blocks {

template <typename S>
void declare_linear(ParamSet<S>& ps, const std::string& prefix, std::size_t in, std::size_t out,
                    bool bias, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  ps.add(prefix + ".w", uniform_tensor<S>(Shape{in, out}, bound, rng));
  if (bias) ps.add(prefix + ".b", uniform_tensor<S>(Shape{out}, bound, rng));
}

template <typename S>
Var<S> linear(Graph<S>& g, const std::string& prefix, const Var<S>& x) {
  Var<S> y = ad::matmul(x, g.param(prefix + ".w"));
  if (g.params().contains(prefix + ".b")) y = ad::add(y, g.param(prefix + ".b"));
  return y;
}

template <typename S>
void declare_layer_norm(ParamSet<S>& ps, const std::string& prefix, std::size_t d) {
  ps.add(prefix + ".gamma", Tensor<S>(Shape{d}, S(1)));
  ps.add(prefix + ".beta", Tensor<S>(Shape{d}, S(0)));
}

template <typename S>
Var<S> layer_norm(Graph<S>& g, const std::string& prefix, const Var<S>& x) {
  return ad::layer_norm(x, g.param(prefix + ".gamma"), g.param(prefix + ".beta"), S(1e-5));
}

template <typename S>
void declare_attention(ParamSet<S>& ps, const std::string& prefix, std::size_t d,
                       std::mt19937_64& rng) {
  for (const char* part : {".q", ".k", ".v", ".o"}) declare_linear(ps, prefix + part, d, d, true, rng);
}

template <typename S>
Var<S> cross_attention(Graph<S>& g, const std::string& prefix, const Var<S>& x_q,
                       const Var<S>& x_kv, double attn_dropout) {
  if (x_q.shape() != x_kv.shape()) {
    throw ShapeError("cross_attention: query " + shape_str(x_q.shape()) + " vs key/value " +
                     shape_str(x_kv.shape()));
  }
  const std::size_t d = x_q.shape()[1];
  const Var<S> q = linear(g, prefix + ".q", x_q);
  const Var<S> k = linear(g, prefix + ".k", x_kv);
  const Var<S> v = linear(g, prefix + ".v", x_kv);
  const S inv_sqrt_d = S(1) / std::sqrt(static_cast<S>(d));
  Var<S> weights = ad::softmax(ad::scale(ad::matmul_nt(q, k), inv_sqrt_d));
  weights = g.dropout(weights, attn_dropout);
  return linear(g, prefix + ".o", ad::matmul(weights, v));
}

template <typename S>
Var<S> self_attention(Graph<S>& g, const std::string& prefix, const Var<S>& x,
                      double attn_dropout) {
  return cross_attention(g, prefix, x, x, attn_dropout);
}

template <typename S>
void declare_mlp(ParamSet<S>& ps, const std::string& prefix, std::size_t d, std::size_t hidden,
                 std::mt19937_64& rng) {
  declare_linear(ps, prefix + ".up", d, hidden, true, rng);
  declare_linear(ps, prefix + ".down", hidden, d, true, rng);
  declare_layer_norm(ps, prefix + ".norm", d);
}

template <typename S>
Var<S> mlp_block(Graph<S>& g, const std::string& prefix, const Var<S>& x, double dropout) {
  Var<S> h = linear(g, prefix + ".down", ad::gelu(linear(g, prefix + ".up", x)));
  return layer_norm(g, prefix + ".norm", ad::add(x, g.dropout(h, dropout)));
}

template <typename S>
void declare_mamba(ParamSet<S>& ps, const std::string& prefix, std::size_t d,
                   const MambaDims& dims, std::mt19937_64& rng) {
  const std::size_t inner = dims.inner(d);
  declare_linear(ps, prefix + ".in_proj", d, 2 * inner, false, rng);
  const double conv_bound = 1.0 / std::sqrt(static_cast<double>(dims.conv_width));
  ps.add(prefix + ".conv.w", uniform_tensor<S>(Shape{inner, dims.conv_width}, conv_bound, rng));
  ps.add(prefix + ".conv.b", uniform_tensor<S>(Shape{inner}, conv_bound, rng));
  auto ssm_params = ssm::SelectiveSsmParams<S>::init(inner, dims.state, dims.rank(d), rng);
  ps.add(prefix + ".ssm.a_log", std::move(ssm_params.a_log));
  ps.add(prefix + ".ssm.w_b", std::move(ssm_params.w_b));
  ps.add(prefix + ".ssm.w_c", std::move(ssm_params.w_c));
  ps.add(prefix + ".ssm.w_delta_down", std::move(ssm_params.w_delta_down));
  ps.add(prefix + ".ssm.w_delta_up", std::move(ssm_params.w_delta_up));
  ps.add(prefix + ".ssm.delta_bias", std::move(ssm_params.delta_bias));
  if (dims.d_skip) ps.add(prefix + ".ssm.d_skip", std::move(ssm_params.d_skip));
  declare_linear(ps, prefix + ".out_proj", inner, d, false, rng);
}

template <typename S>
Var<S> mamba_core(Graph<S>& g, const std::string& prefix, const Var<S>& x,
                  const MambaDims& dims) {
  if (x.shape().size() != 2 || x.shape()[0] == 0) {
    throw ShapeError("mamba: input must be T x d with T >= 1, got " + shape_str(x.shape()));
  }
  const std::size_t inner = dims.inner(x.shape()[1]);
  const Var<S> xz = linear(g, prefix + ".in_proj", x);
  const Var<S> branch = ad::slice(xz, 1, 0, inner);
  const Var<S> gate = ad::slice(xz, 1, inner, inner);
  const Var<S> u = ad::silu(
      ad::add(ad::causal_conv1d(branch, g.param(prefix + ".conv.w")), g.param(prefix + ".conv.b")));

  const std::string sp = prefix + ".ssm";
  const Var<S> b = ad::matmul(u, g.param(sp + ".w_b"));
  const Var<S> c = ad::matmul(u, g.param(sp + ".w_c"));
  const Var<S> delta = ad::softplus(ad::add(
      ad::matmul(ad::matmul(u, g.param(sp + ".w_delta_down")), g.param(sp + ".w_delta_up")),
      g.param(sp + ".delta_bias")));
  const Var<S> a = ad::scale(ad::exp(g.param(sp + ".a_log")), S(-1));
  const Var<S> skip = dims.d_skip ? g.param(sp + ".d_skip") : Var<S>{};
  const Var<S> y = ssm::selective_scan(u, delta, a, b, c, skip, dims.scan);

  return linear(g, prefix + ".out_proj", ad::mul(y, ad::silu(gate)));
}

template <typename S>
Var<S> mamba_block(Graph<S>& g, const std::string& prefix, const Var<S>& x,
                   const MambaDims& dims, double dropout) {
  return g.dropout(mamba_core(g, prefix, x, dims), dropout);
}

template <typename S>
Var<S> bidirectional_mamba(Graph<S>& g, const std::string& fwd_prefix,
                           const std::string& bwd_prefix, const Var<S>& x,
                           const MambaDims& dims) {
  const Var<S> fwd = mamba_core(g, fwd_prefix, x, dims);
  const Var<S> bwd = ad::flip(mamba_core(g, bwd_prefix, ad::flip(x, 0), dims), 0);
  return ad::add(fwd, bwd);
}

template <typename S>
void declare_lstm(ParamSet<S>& ps, const std::string& prefix, std::size_t d,
                  std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  ps.add(prefix + ".w_ih", uniform_tensor<S>(Shape{d, 4 * d}, bound, rng));
  ps.add(prefix + ".w_hh", uniform_tensor<S>(Shape{d, 4 * d}, bound, rng));
  Tensor<S> b_ih = uniform_tensor<S>(Shape{4 * d}, bound, rng);
  Tensor<S> b_hh = uniform_tensor<S>(Shape{4 * d}, bound, rng);
  // Gate order i, f, g, o. Forget bias sums to 1.
  for (std::size_t j = d; j < 2 * d; ++j) {
    b_ih[j] = S(1);
    b_hh[j] = S(0);
  }
  ps.add(prefix + ".b_ih", std::move(b_ih));
  ps.add(prefix + ".b_hh", std::move(b_hh));
}

template <typename S>
Var<S> lstm_direction(Graph<S>& g, const std::string& prefix, const Var<S>& x) {
  if (x.shape().size() != 2 || x.shape()[0] == 0) {
    throw ShapeError("lstm: input must be T x d with T >= 1, got " + shape_str(x.shape()));
  }
  const std::size_t t_len = x.shape()[0], d = x.shape()[1];
  const Var<S> w_hh = g.param(prefix + ".w_hh");
  const Var<S> xw = ad::add(ad::add(ad::matmul(x, g.param(prefix + ".w_ih")),
                                    g.param(prefix + ".b_ih")),
                            g.param(prefix + ".b_hh"));
  Var<S> h = Var<S>::constant(Tensor<S>(Shape{1, d}));
  Var<S> c = h;
  std::vector<Var<S>> hs;
  hs.reserve(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    const Var<S> gates = ad::add(ad::slice(xw, 0, t, 1), ad::matmul(h, w_hh));
    const Var<S> i = ad::sigmoid(ad::slice(gates, 1, 0, d));
    const Var<S> f = ad::sigmoid(ad::slice(gates, 1, d, d));
    const Var<S> cand = ad::tanh(ad::slice(gates, 1, 2 * d, d));
    const Var<S> o = ad::sigmoid(ad::slice(gates, 1, 3 * d, d));
    c = ad::add(ad::mul(f, c), ad::mul(i, cand));
    h = ad::mul(o, ad::tanh(c));
    hs.push_back(h);
  }
  return ad::concat(hs, 0);
}

template <typename S>
MambaStepper<S>::MambaStepper(const ParamSet<S>& params, const std::string& prefix,
                              std::size_t d, const MambaDims& dims)
    : d_(d), dims_(dims) {
  const std::size_t inner = dims.inner(d);
  in_proj_ = params.get(prefix + ".in_proj.w");
  require_shape(in_proj_, Shape{d, 2 * inner}, "MambaStepper in_proj");
  conv_w_ = params.get(prefix + ".conv.w");
  conv_b_ = params.get(prefix + ".conv.b");
  out_proj_ = params.get(prefix + ".out_proj.w");
  const std::string sp = prefix + ".ssm";
  ssm_.a_log = params.get(sp + ".a_log");
  ssm_.w_b = params.get(sp + ".w_b");
  ssm_.w_c = params.get(sp + ".w_c");
  ssm_.w_delta_down = params.get(sp + ".w_delta_down");
  ssm_.w_delta_up = params.get(sp + ".w_delta_up");
  ssm_.delta_bias = params.get(sp + ".delta_bias");
  ssm_.use_d_skip = dims.d_skip;
  ssm_.d_skip = dims.d_skip ? params.get(sp + ".d_skip") : Tensor<S>(Shape{inner});
  ssm_.validate();
  reset();
}

template <typename S>
void MambaStepper<S>::reset() {
  const std::size_t inner = dims_.inner(d_);
  window_ = Tensor<S>(Shape{dims_.conv_width - 1, inner});
  state_ = ssm::HiddenState<S>::zeros(inner, dims_.state);
  steps_ = 0;
}

template <typename S>
std::size_t MambaStepper<S>::state_bytes() const {
  return window_.size() * sizeof(S) + state_.bytes();
}

template <typename S>
Tensor<S> MambaStepper<S>::step(const Tensor<S>& x_t) {
  require_shape(x_t, Shape{d_}, "MambaStepper input");
  const std::size_t inner = dims_.inner(d_), k_len = dims_.conv_width;
  const Tensor<S> xz = kernels::matmul(x_t.reshaped(Shape{1, d_}), in_proj_);
  Tensor<S> u(Shape{inner});
  for (std::size_t c = 0; c < inner; ++c) {
    S acc = 0;
    for (std::size_t k = 0; k < k_len; ++k) {
      const std::size_t lag = k_len - 1 - k;
      const S v = lag == 0 ? xz[c] : window_[(k_len - 1 - lag) * inner + c];
      acc += conv_w_[c * k_len + k] * v;
    }
    u[c] = acc + conv_b_[c];
  }
  // Slide the window: drop the oldest frame, append the current branch input.
  for (std::size_t r = 0; r + 1 < k_len - 1; ++r)
    for (std::size_t c = 0; c < inner; ++c) window_[r * inner + c] = window_[(r + 1) * inner + c];
  if (k_len > 1)
    for (std::size_t c = 0; c < inner; ++c) window_[(k_len - 2) * inner + c] = xz[c];
  u = kernels::silu(u);

  ssm::StepResult<S> r = ssm::ssm_step(state_, u, ssm_, steps_);
  state_ = std::move(r.h);
  Tensor<S> gated(Shape{1, inner});
  for (std::size_t c = 0; c < inner; ++c) {
    const S z = xz[inner + c];
    gated[c] = r.y[c] * (z * kernels::sigmoid(z));
  }
  ++steps_;
  return kernels::matmul(gated, out_proj_).reshaped(Shape{d_});
}

#define SIPM_INSTANTIATE_BLOCKS(S)                                                               \
  template void declare_linear(ParamSet<S>&, const std::string&, std::size_t, std::size_t, bool, \
                               std::mt19937_64&);                                                \
  template Var<S> linear(Graph<S>&, const std::string&, const Var<S>&);                          \
  template void declare_layer_norm(ParamSet<S>&, const std::string&, std::size_t);               \
  template Var<S> layer_norm(Graph<S>&, const std::string&, const Var<S>&);                      \
  template void declare_attention(ParamSet<S>&, const std::string&, std::size_t,                 \
                                  std::mt19937_64&);                                             \
  template Var<S> cross_attention(Graph<S>&, const std::string&, const Var<S>&, const Var<S>&,   \
                                  double);                                                       \
  template Var<S> self_attention(Graph<S>&, const std::string&, const Var<S>&, double);          \
  template void declare_mlp(ParamSet<S>&, const std::string&, std::size_t, std::size_t,          \
                            std::mt19937_64&);                                                   \
  template Var<S> mlp_block(Graph<S>&, const std::string&, const Var<S>&, double);               \
  template void declare_mamba(ParamSet<S>&, const std::string&, std::size_t, const MambaDims&,   \
                              std::mt19937_64&);                                                 \
  template Var<S> mamba_core(Graph<S>&, const std::string&, const Var<S>&, const MambaDims&);    \
  template Var<S> mamba_block(Graph<S>&, const std::string&, const Var<S>&, const MambaDims&,    \
                              double);                                                           \
  template Var<S> bidirectional_mamba(Graph<S>&, const std::string&, const std::string&,         \
                                      const Var<S>&, const MambaDims&);                          \
  template void declare_lstm(ParamSet<S>&, const std::string&, std::size_t, std::mt19937_64&);   \
  template Var<S> lstm_direction(Graph<S>&, const std::string&, const Var<S>&);                  \
  template class MambaStepper<S>;

SIPM_INSTANTIATE_BLOCKS(float)
SIPM_INSTANTIATE_BLOCKS(double)
#undef SIPM_INSTANTIATE_BLOCKS

}  // namespace sipm::blocks
