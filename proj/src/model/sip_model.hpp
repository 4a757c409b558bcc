// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <string>

#include "blocks/variants.hpp"
#include "json.hpp"

namespace sipm::model {

using blocks::TemporalVariant;

// Hearing thresholds are expected in dB HL within this range.
inline constexpr double kMinThresholdDb = -10.0;
inline constexpr double kMaxThresholdDb = 120.0;
// Thresholds are divided by this before the audiogram projection.
inline constexpr double kAudiogramScaleDb = 100.0;

struct ModelConfig {
  bool binaural = false;
  TemporalVariant variant = TemporalVariant::kTransformer;
  std::size_t d = 384;
  std::size_t pool = 20;
  std::size_t layers = 32;
  std::size_t d_in = 1280;
  std::size_t freqs = 8;
  std::size_t mlp_hidden = 0;  // 0: 4 d
  double transformer_dropout = 0.1;
  double recurrent_dropout = 0.3;
  double layer_dropout = 0.1;
  blocks::MambaDims mamba;
  std::uint64_t seed = 0;

  void validate() const;
  blocks::TemporalConfig temporal() const;
  blocks::TemporalConfig layer_transform() const;
};

nlohmann::json config_to_json(const ModelConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig config_from_json(const nlohmann::json& j);

// Average over non-overlapping windows of p frames; a short final window is
// averaged over its own length. x is T x D.
template <typename S>
Tensor<S> pool_time(const Tensor<S>& x, std::size_t p);

// (x - mean) / max(std, 1e-8) per feature. feats is L x T x D; mean and std
// are L x D (per layer) or 1 x D (shared by all layers).
template <typename S>
Tensor<S> normalize_features(const Tensor<S>& feats, const Tensor<double>& mean,
                             const Tensor<double>& std);

inline constexpr double kStdFloor = 1e-8;

template <typename S>
class SipModel {
 public:
  // Declares every parameter and initializes it from cfg.seed.
  explicit SipModel(const ModelConfig& cfg);
  // Adopts existing parameters; names and shapes must match the config.
  SipModel(const ModelConfig& cfg, ParamSet<S> params);

  const ModelConfig& config() const { return cfg_; }
  const ParamSet<S>& params() const { return params_; }
  ParamSet<S>& params() { return params_; }
  std::size_t param_count() const { return params_.count(); }

  // L x d matrix of time-pooled layer embeddings. feats is L x T x D_in.
  Var<S> encode_layers(Graph<S>& g, const Tensor<S>& feats) const;
  // Left and right L x d matrices with the channels coupled by the
  // binaural temporal block.
  std::pair<Var<S>, Var<S>> encode_layers_binaural(Graph<S>& g, const Tensor<S>& left,
                                                   const Tensor<S>& right) const;
  // 1 x d. Rejects a wrong number of thresholds or values out of range.
  Var<S> embed_audiogram(Graph<S>& g, const Tensor<S>& thresholds) const;
  // Layer transform over the (L+1) x d stack, then the mean over rows: 1 x d.
  Var<S> pool_layers(Graph<S>& g, const Var<S>& layer_embs, const Var<S>& audio_emb) const;
  // sigmoid(linear(pooled)) * 100, a single-element tensor.
  Var<S> head(Graph<S>& g, const Var<S>& pooled) const;
  Var<S> layerwise_head(Graph<S>& g, const Var<S>& layer_embs, const Var<S>& audio_emb) const;

  Var<S> forward_mono(Graph<S>& g, const Tensor<S>& feats, const Tensor<S>& audiogram) const;
  Var<S> forward_binaural(Graph<S>& g, const Tensor<S>& feats_left, const Tensor<S>& feats_right,
                          const Tensor<S>& audiogram_left,
                          const Tensor<S>& audiogram_right) const;

  // Eval-mode predictions in percent.
  S predict_mono(const Tensor<S>& feats, const Tensor<S>& audiogram) const;
  S predict_binaural(const Tensor<S>& feats_left, const Tensor<S>& feats_right,
                     const Tensor<S>& audiogram_left, const Tensor<S>& audiogram_right) const;

 private:
  void check_features(const Tensor<S>& feats, const char* what) const;
  Var<S> project_layer(Graph<S>& g, const Tensor<S>& feats, std::size_t layer) const;

  ModelConfig cfg_;
  ParamSet<S> params_;
};

extern template class SipModel<float>;
extern template class SipModel<double>;

// Declares the parameters of a model without keeping them.
template <typename S>
ParamSet<S> declare_model(const ModelConfig& cfg);

// Trainable parameter count of `cfg`.
std::size_t count_parameters(const ModelConfig& cfg);
// Count for a variant at the full-size defaults (d 384, D_in 1280, F 8).
std::size_t count_parameters(TemporalVariant v, bool binaural);

}  // namespace sipm::model
