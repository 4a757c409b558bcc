// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <array>
#include <string>
#include <string_view>
#include <utility>

#include "blocks/blocks.hpp"

namespace sipm::blocks {

enum class TemporalVariant {
  kTransformer,
  kTransformerNoSkip,
  kTransformerNoMlp,
  kUniMamba,
  kUniMambaSkip,
  kUniMambaMlp,
  kBiMamba,
  kBiMambaSkip,
  kBiMambaMlp,
  kUniLstm,
  kBiLstm,
};

inline constexpr std::array<TemporalVariant, 11> kAllVariants = {
    TemporalVariant::kTransformer, TemporalVariant::kTransformerNoSkip,
    TemporalVariant::kTransformerNoMlp, TemporalVariant::kUniMamba,
    TemporalVariant::kUniMambaSkip, TemporalVariant::kUniMambaMlp,
    TemporalVariant::kBiMamba, TemporalVariant::kBiMambaSkip,
    TemporalVariant::kBiMambaMlp, TemporalVariant::kUniLstm,
    TemporalVariant::kBiLstm};

// Variants with a binaural form.
inline constexpr std::array<TemporalVariant, 7> kBinauralVariants = {
    TemporalVariant::kTransformer, TemporalVariant::kTransformerNoSkip,
    TemporalVariant::kTransformerNoMlp, TemporalVariant::kUniMamba,
    TemporalVariant::kUniMambaMlp, TemporalVariant::kBiMamba,
    TemporalVariant::kBiMambaMlp};

std::string_view variant_name(TemporalVariant v);
// Throws UsageError for unknown names.
TemporalVariant parse_variant(std::string_view name);
bool supports_binaural(TemporalVariant v);
bool is_transformer(TemporalVariant v);
bool is_mamba(TemporalVariant v);
bool is_lstm(TemporalVariant v);
bool is_bidirectional(TemporalVariant v);

struct TemporalConfig {
  std::size_t d = 384;
  std::size_t mlp_hidden = 0;  // 0: 4 d
  MambaDims mamba;
  double transformer_dropout = 0.1;
  double recurrent_dropout = 0.3;  // Mamba and LSTM blocks

  std::size_t hidden() const { return mlp_hidden ? mlp_hidden : 4 * d; }
};

template <typename S>
void declare_temporal(ParamSet<S>& ps, const std::string& prefix, TemporalVariant v,
                      const TemporalConfig& cfg, std::mt19937_64& rng);

// transformer: MLP(LN(x + drop(SelfAttn(x)))), with the residual or the MLP
// removed in the ablation variants.
// Mamba: LN(drop(M(x))) or LN(x + drop(M(x))) for +skip, MLP(...) for +mlp,
// where M is the uni- or bidirectional Mamba.
// LSTM: drop(H) (uni) or drop(W [H_fwd ; H_bwd]) (bi).
template <typename S>
Var<S> temporal_block(Graph<S>& g, const std::string& prefix, TemporalVariant v,
                      const TemporalConfig& cfg, const Var<S>& x);

template <typename S>
void declare_binaural_temporal(ParamSet<S>& ps, const std::string& prefix, TemporalVariant v,
                               const TemporalConfig& cfg, std::mt19937_64& rng);

// Transformer form: per channel s_c = LN(x_c + drop(SelfAttn(x_c))), then
// LN(s_c + drop(CrossAttn_c(s_c, s_other))) with one cross-attention weight
// set per direction, then the MLP block. Self-attention, norms and MLP are
// shared between channels.
//
// Mamba form: M_c is the (uni/bi) Mamba output of channel c with weights
// shared between channels. Channels mix through
//   mix_c = W_self M_c + W_other M_other + b,
//   y_c   = LN(x_c + drop(GELU(mix_c))),
// optionally followed by the MLP block. The bidirectional form mixes the
// forward and backward streams separately and fuses them with a third pair
// map.
template <typename S>
std::pair<Var<S>, Var<S>> binaural_temporal_block(Graph<S>& g, const std::string& prefix,
                                                  TemporalVariant v, const TemporalConfig& cfg,
                                                  const Var<S>& x_left, const Var<S>& x_right);

// Names of the weights that carry one channel's signal into the other.
std::vector<std::string> binaural_cross_weights(const std::string& prefix, TemporalVariant v);

}  // namespace sipm::blocks
