// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <random>
#include <string>

#include "blocks/param_set.hpp"
#include "ssm/selective_ssm.hpp"

// Building blocks of the temporal transforms. Each block has a declare_*
// function that registers its parameters under a name prefix and a forward
// function that reads them back through a Graph. Sequences are T x d.
namespace sipm::blocks {

struct MambaDims {
  std::size_t expand = 2;
  std::size_t state = 16;
  std::size_t conv_width = 4;
  std::size_t delta_rank = 0;  // 0: ceil(d / 16)
  bool d_skip = true;
  ssm::ScanMode scan = ssm::ScanMode::kSequential;

  std::size_t inner(std::size_t d) const { return expand * d; }
  std::size_t rank(std::size_t d) const {
    return delta_rank ? delta_rank : (d + 15) / 16;
  }
};

template <typename S>
void declare_linear(ParamSet<S>& ps, const std::string& prefix, std::size_t in, std::size_t out,
                    bool bias, std::mt19937_64& rng);
template <typename S>
Var<S> linear(Graph<S>& g, const std::string& prefix, const Var<S>& x);

template <typename S>
void declare_layer_norm(ParamSet<S>& ps, const std::string& prefix, std::size_t d);
template <typename S>
Var<S> layer_norm(Graph<S>& g, const std::string& prefix, const Var<S>& x);

// Single-head attention: W_Q, W_K, W_V, W_O, each d x d with bias.
template <typename S>
void declare_attention(ParamSet<S>& ps, const std::string& prefix, std::size_t d,
                       std::mt19937_64& rng);
// softmax(Q K^T / sqrt(d)) V followed by the output projection. Queries come
// from x_q, keys and values from x_kv. No causal mask, no positional terms.
// `attn_dropout` applies to the attention weights in train mode.
template <typename S>
Var<S> cross_attention(Graph<S>& g, const std::string& prefix, const Var<S>& x_q,
                       const Var<S>& x_kv, double attn_dropout);
template <typename S>
Var<S> self_attention(Graph<S>& g, const std::string& prefix, const Var<S>& x,
                      double attn_dropout);

// LN(x + dropout(W_down GELU(W_up x))).
template <typename S>
void declare_mlp(ParamSet<S>& ps, const std::string& prefix, std::size_t d, std::size_t hidden,
                 std::mt19937_64& rng);
template <typename S>
Var<S> mlp_block(Graph<S>& g, const std::string& prefix, const Var<S>& x, double dropout);

// Mamba block: in_proj (d -> 2E d, no bias) splits into a conv/SSM branch
// and a gate branch; out_proj (E d -> d, no bias).
template <typename S>
void declare_mamba(ParamSet<S>& ps, const std::string& prefix, std::size_t d,
                   const MambaDims& dims, std::mt19937_64& rng);
// Block without output dropout.
template <typename S>
Var<S> mamba_core(Graph<S>& g, const std::string& prefix, const Var<S>& x,
                  const MambaDims& dims);
// Block with output dropout (train mode only).
template <typename S>
Var<S> mamba_block(Graph<S>& g, const std::string& prefix, const Var<S>& x,
                   const MambaDims& dims, double dropout);
// fwd(x) + flip(bwd(flip(x))).
template <typename S>
Var<S> bidirectional_mamba(Graph<S>& g, const std::string& fwd_prefix,
                           const std::string& bwd_prefix, const Var<S>& x,
                           const MambaDims& dims);

// Standard LSTM gates (i, f, g, o) with input and recurrent biases; the
// forget-gate bias starts at 1.
template <typename S>
void declare_lstm(ParamSet<S>& ps, const std::string& prefix, std::size_t d,
                  std::mt19937_64& rng);
// Runs one direction over x (T x d) from zero state, returns all hidden
// states (T x d).
template <typename S>
Var<S> lstm_direction(Graph<S>& g, const std::string& prefix, const Var<S>& x);

// Streaming (frame-by-frame) evaluation of a Mamba block with state whose
// size is independent of the number of frames consumed.
template <typename S>
class MambaStepper {
 public:
  MambaStepper(const ParamSet<S>& params, const std::string& prefix, std::size_t d,
               const MambaDims& dims);

  // x_t: d values; returns d values.
  Tensor<S> step(const Tensor<S>& x_t);
  void reset();
  std::size_t steps() const { return steps_; }
  // Bytes of recurrent state (conv window + SSM hidden state).
  std::size_t state_bytes() const;

 private:
  std::size_t d_;
  MambaDims dims_;
  Tensor<S> in_proj_, conv_w_, conv_b_, out_proj_;
  ssm::SelectiveSsmParams<S> ssm_;
  Tensor<S> window_;  // (K-1) x E d, most recent last
  ssm::HiddenState<S> state_;
  std::size_t steps_ = 0;
};

extern template class MambaStepper<float>;
extern template class MambaStepper<double>;

}  // namespace sipm::blocks
