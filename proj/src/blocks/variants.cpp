// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "blocks/variants.hpp"

#include <cmath>

namespace sipm::blocks {
namespace {

struct VariantInfo {
  TemporalVariant v;
  std::string_view name;
};

constexpr VariantInfo kNames[] = {
    {TemporalVariant::kTransformer, "transformer"},
    {TemporalVariant::kTransformerNoSkip, "transformer-no-skip"},
    {TemporalVariant::kTransformerNoMlp, "transformer-no-mlp"},
    {TemporalVariant::kUniMamba, "uni-mamba"},
    {TemporalVariant::kUniMambaSkip, "uni-mamba+skip"},
    {TemporalVariant::kUniMambaMlp, "uni-mamba+mlp"},
    {TemporalVariant::kBiMamba, "bi-mamba"},
    {TemporalVariant::kBiMambaSkip, "bi-mamba+skip"},
    {TemporalVariant::kBiMambaMlp, "bi-mamba+mlp"},
    {TemporalVariant::kUniLstm, "uni-lstm"},
    {TemporalVariant::kBiLstm, "bi-lstm"},
};

bool has_mlp(TemporalVariant v) {
  return v == TemporalVariant::kTransformer || v == TemporalVariant::kTransformerNoSkip ||
         v == TemporalVariant::kUniMambaMlp || v == TemporalVariant::kBiMambaMlp;
}

bool has_input_skip(TemporalVariant v) {
  return v == TemporalVariant::kUniMambaSkip || v == TemporalVariant::kBiMambaSkip;
}

// W_self a + W_other b + bias.
template <typename S>
void declare_pair(ParamSet<S>& ps, const std::string& prefix, std::size_t d,
                  std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(2.0 * static_cast<double>(d));
  ps.add(prefix + ".w_self", uniform_tensor<S>(Shape{d, d}, bound, rng));
  ps.add(prefix + ".w_other", uniform_tensor<S>(Shape{d, d}, bound, rng));
  ps.add(prefix + ".b", uniform_tensor<S>(Shape{d}, bound, rng));
}

template <typename S>
Var<S> pair(Graph<S>& g, const std::string& prefix, const Var<S>& self, const Var<S>& other) {
  return ad::add(ad::add(ad::matmul(self, g.param(prefix + ".w_self")),
                         ad::matmul(other, g.param(prefix + ".w_other"))),
                 g.param(prefix + ".b"));
}

template <typename S>
void declare_mamba_stack(ParamSet<S>& ps, const std::string& prefix, TemporalVariant v,
                         const TemporalConfig& cfg, std::mt19937_64& rng) {
  if (is_bidirectional(v)) {
    declare_mamba(ps, prefix + ".mamba_fwd", cfg.d, cfg.mamba, rng);
    declare_mamba(ps, prefix + ".mamba_bwd", cfg.d, cfg.mamba, rng);
  } else {
    declare_mamba(ps, prefix + ".mamba", cfg.d, cfg.mamba, rng);
  }
}

template <typename S>
Var<S> transformer_front(Graph<S>& g, const std::string& prefix, bool skip,
                         const TemporalConfig& cfg, const Var<S>& x) {
  const double p = cfg.transformer_dropout;
  Var<S> a = g.dropout(self_attention(g, prefix + ".attn", x, p), p);
  if (skip) a = ad::add(x, a);
  return layer_norm(g, prefix + ".attn_norm", a);
}

}  // namespace

std::string_view variant_name(TemporalVariant v) {
  for (const auto& e : kNames)
    if (e.v == v) return e.name;
  return "unknown";
}

TemporalVariant parse_variant(std::string_view name) {
  for (const auto& e : kNames)
    if (e.name == name) return e.v;
  std::string known;
  for (const auto& e : kNames) known += (known.empty() ? "" : ", ") + std::string(e.name);
  throw UsageError("unknown temporal variant '" + std::string(name) + "' (known: " + known + ")");
}

bool supports_binaural(TemporalVariant v) {
  for (auto b : kBinauralVariants)
    if (b == v) return true;
  return false;
}

bool is_transformer(TemporalVariant v) {
  return v == TemporalVariant::kTransformer || v == TemporalVariant::kTransformerNoSkip ||
         v == TemporalVariant::kTransformerNoMlp;
}

bool is_lstm(TemporalVariant v) {
  return v == TemporalVariant::kUniLstm || v == TemporalVariant::kBiLstm;
}

bool is_mamba(TemporalVariant v) { return !is_transformer(v) && !is_lstm(v); }

bool is_bidirectional(TemporalVariant v) {
  return v == TemporalVariant::kBiMamba || v == TemporalVariant::kBiMambaSkip ||
         v == TemporalVariant::kBiMambaMlp || v == TemporalVariant::kBiLstm;
}

template <typename S>
void declare_temporal(ParamSet<S>& ps, const std::string& prefix, TemporalVariant v,
                      const TemporalConfig& cfg, std::mt19937_64& rng) {
  if (is_transformer(v)) {
    declare_attention(ps, prefix + ".attn", cfg.d, rng);
    declare_layer_norm(ps, prefix + ".attn_norm", cfg.d);
  } else if (is_mamba(v)) {
    declare_mamba_stack(ps, prefix, v, cfg, rng);
    declare_layer_norm(ps, prefix + ".norm", cfg.d);
  } else if (v == TemporalVariant::kUniLstm) {
    declare_lstm(ps, prefix + ".lstm", cfg.d, rng);
  } else {
    declare_lstm(ps, prefix + ".lstm_fwd", cfg.d, rng);
    declare_lstm(ps, prefix + ".lstm_bwd", cfg.d, rng);
    declare_linear(ps, prefix + ".proj", 2 * cfg.d, cfg.d, true, rng);
  }
  if (has_mlp(v)) declare_mlp(ps, prefix + ".mlp", cfg.d, cfg.hidden(), rng);
}

template <typename S>
Var<S> temporal_block(Graph<S>& g, const std::string& prefix, TemporalVariant v,
                      const TemporalConfig& cfg, const Var<S>& x) {
  if (is_transformer(v)) {
    Var<S> y = transformer_front(g, prefix, v != TemporalVariant::kTransformerNoSkip, cfg, x);
    if (has_mlp(v)) y = mlp_block(g, prefix + ".mlp", y, cfg.transformer_dropout);
    return y;
  }
  const double p = cfg.recurrent_dropout;
  if (is_lstm(v)) {
    if (v == TemporalVariant::kUniLstm) return g.dropout(lstm_direction(g, prefix + ".lstm", x), p);
    const Var<S> fwd = lstm_direction(g, prefix + ".lstm_fwd", x);
    const Var<S> bwd = ad::flip(lstm_direction(g, prefix + ".lstm_bwd", ad::flip(x, 0)), 0);
    return g.dropout(linear(g, prefix + ".proj", ad::concat<S>({fwd, bwd}, 1)), p);
  }
  Var<S> m = is_bidirectional(v)
                 ? bidirectional_mamba(g, prefix + ".mamba_fwd", prefix + ".mamba_bwd", x, cfg.mamba)
                 : mamba_core(g, prefix + ".mamba", x, cfg.mamba);
  m = g.dropout(m, p);
  if (has_input_skip(v)) m = ad::add(x, m);
  Var<S> y = layer_norm(g, prefix + ".norm", m);
  if (has_mlp(v)) y = mlp_block(g, prefix + ".mlp", y, p);
  return y;
}

template <typename S>
void declare_binaural_temporal(ParamSet<S>& ps, const std::string& prefix, TemporalVariant v,
                               const TemporalConfig& cfg, std::mt19937_64& rng) {
  if (!supports_binaural(v)) {
    throw UsageError("variant '" + std::string(variant_name(v)) + "' has no binaural form");
  }
  if (is_transformer(v)) {
    declare_attention(ps, prefix + ".attn", cfg.d, rng);
    declare_layer_norm(ps, prefix + ".attn_norm", cfg.d);
    declare_attention(ps, prefix + ".xattn_l", cfg.d, rng);
    declare_attention(ps, prefix + ".xattn_r", cfg.d, rng);
    declare_layer_norm(ps, prefix + ".xattn_norm", cfg.d);
  } else {
    declare_mamba_stack(ps, prefix, v, cfg, rng);
    if (is_bidirectional(v)) {
      declare_pair(ps, prefix + ".mix_fwd", cfg.d, rng);
      declare_pair(ps, prefix + ".mix_bwd", cfg.d, rng);
      declare_pair(ps, prefix + ".mix_dir", cfg.d, rng);
    } else {
      declare_pair(ps, prefix + ".mix", cfg.d, rng);
    }
    declare_layer_norm(ps, prefix + ".norm", cfg.d);
  }
  if (has_mlp(v)) declare_mlp(ps, prefix + ".mlp", cfg.d, cfg.hidden(), rng);
}

template <typename S>
std::pair<Var<S>, Var<S>> binaural_temporal_block(Graph<S>& g, const std::string& prefix,
                                                  TemporalVariant v, const TemporalConfig& cfg,
                                                  const Var<S>& x_left, const Var<S>& x_right) {
  if (!supports_binaural(v)) {
    throw UsageError("variant '" + std::string(variant_name(v)) + "' has no binaural form");
  }
  if (x_left.shape() != x_right.shape()) {
    throw ShapeError("binaural block: left " + shape_str(x_left.shape()) + " vs right " +
                     shape_str(x_right.shape()));
  }
  Var<S> yl, yr;
  if (is_transformer(v)) {
    const double p = cfg.transformer_dropout;
    const bool skip = v != TemporalVariant::kTransformerNoSkip;
    const Var<S> sl = transformer_front(g, prefix, skip, cfg, x_left);
    const Var<S> sr = transformer_front(g, prefix, skip, cfg, x_right);
    const Var<S> cl = g.dropout(cross_attention(g, prefix + ".xattn_l", sl, sr, p), p);
    const Var<S> cr = g.dropout(cross_attention(g, prefix + ".xattn_r", sr, sl, p), p);
    yl = layer_norm(g, prefix + ".xattn_norm", ad::add(sl, cl));
    yr = layer_norm(g, prefix + ".xattn_norm", ad::add(sr, cr));
    if (has_mlp(v)) {
      yl = mlp_block(g, prefix + ".mlp", yl, p);
      yr = mlp_block(g, prefix + ".mlp", yr, p);
    }
    return {yl, yr};
  }
  const double p = cfg.recurrent_dropout;
  Var<S> mix_l, mix_r;
  if (is_bidirectional(v)) {
    auto backward = [&](const Var<S>& x) {
      return ad::flip(mamba_core(g, prefix + ".mamba_bwd", ad::flip(x, 0), cfg.mamba), 0);
    };
    const Var<S> fl = mamba_core(g, prefix + ".mamba_fwd", x_left, cfg.mamba);
    const Var<S> fr = mamba_core(g, prefix + ".mamba_fwd", x_right, cfg.mamba);
    const Var<S> bl = backward(x_left);
    const Var<S> br = backward(x_right);
    // Per-direction ear mixes, then a third pair map fuses the two directions.
    const Var<S> fwd_l = pair(g, prefix + ".mix_fwd", fl, fr);
    const Var<S> fwd_r = pair(g, prefix + ".mix_fwd", fr, fl);
    const Var<S> bwd_l = pair(g, prefix + ".mix_bwd", bl, br);
    const Var<S> bwd_r = pair(g, prefix + ".mix_bwd", br, bl);
    mix_l = pair(g, prefix + ".mix_dir", fwd_l, bwd_l);
    mix_r = pair(g, prefix + ".mix_dir", fwd_r, bwd_r);
  } else {
    const Var<S> ml = mamba_core(g, prefix + ".mamba", x_left, cfg.mamba);
    const Var<S> mr = mamba_core(g, prefix + ".mamba", x_right, cfg.mamba);
    mix_l = pair(g, prefix + ".mix", ml, mr);
    mix_r = pair(g, prefix + ".mix", mr, ml);
  }
  yl = layer_norm(g, prefix + ".norm", ad::add(x_left, g.dropout(ad::gelu(mix_l), p)));
  yr = layer_norm(g, prefix + ".norm", ad::add(x_right, g.dropout(ad::gelu(mix_r), p)));
  if (has_mlp(v)) {
    yl = mlp_block(g, prefix + ".mlp", yl, p);
    yr = mlp_block(g, prefix + ".mlp", yr, p);
  }
  return {yl, yr};
}

std::vector<std::string> binaural_cross_weights(const std::string& prefix, TemporalVariant v) {
  if (is_transformer(v)) {
    std::vector<std::string> names;
    for (const char* side : {".xattn_l", ".xattn_r"})
      for (const char* part : {".k.w", ".k.b", ".v.w", ".v.b"}) names.push_back(prefix + side + part);
    return names;
  }
  if (is_bidirectional(v)) return {prefix + ".mix_fwd.w_other", prefix + ".mix_bwd.w_other"};
  return {prefix + ".mix.w_other"};
}

#define SIPM_INSTANTIATE_VARIANTS(S)                                                          \
  template void declare_temporal(ParamSet<S>&, const std::string&, TemporalVariant,           \
                                 const TemporalConfig&, std::mt19937_64&);                    \
  template Var<S> temporal_block(Graph<S>&, const std::string&, TemporalVariant,              \
                                 const TemporalConfig&, const Var<S>&);                       \
  template void declare_binaural_temporal(ParamSet<S>&, const std::string&, TemporalVariant,  \
                                          const TemporalConfig&, std::mt19937_64&);           \
  template std::pair<Var<S>, Var<S>> binaural_temporal_block(                                 \
      Graph<S>&, const std::string&, TemporalVariant, const TemporalConfig&, const Var<S>&,   \
      const Var<S>&);

SIPM_INSTANTIATE_VARIANTS(float)
SIPM_INSTANTIATE_VARIANTS(double)
#undef SIPM_INSTANTIATE_VARIANTS

}  // namespace sipm::blocks
