// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "model/sip_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace sipm::model {

using nlohmann::json;

void ModelConfig::validate() const {
  if (d == 0 || layers == 0 || d_in == 0 || freqs == 0) {
    throw UsageError("model dims must be positive (d, layers, d_in, freqs)");
  }
  if (pool == 0) throw UsageError("pooling size must be >= 1");
  for (double p : {transformer_dropout, recurrent_dropout, layer_dropout}) {
    if (!(p >= 0.0 && p < 1.0)) throw UsageError("dropout rates must lie in [0, 1)");
  }
  if (mamba.expand == 0 || mamba.state == 0 || mamba.conv_width == 0) {
    throw UsageError("mamba expand, state and conv_width must be positive");
  }
  if (binaural && !blocks::supports_binaural(variant)) {
    throw UsageError("variant '" + std::string(blocks::variant_name(variant)) +
                     "' has no binaural form");
  }
}

blocks::TemporalConfig ModelConfig::temporal() const {
  blocks::TemporalConfig t;
  t.d = d;
  t.mlp_hidden = mlp_hidden;
  t.mamba = mamba;
  t.transformer_dropout = transformer_dropout;
  t.recurrent_dropout = recurrent_dropout;
  return t;
}

blocks::TemporalConfig ModelConfig::layer_transform() const {
  blocks::TemporalConfig t = temporal();
  t.transformer_dropout = layer_dropout;
  return t;
}

json config_to_json(const ModelConfig& c) {
  return json{
      {"binaural", c.binaural},
      {"variant", std::string(blocks::variant_name(c.variant))},
      {"d", c.d},
      {"pool", c.pool},
      {"layers", c.layers},
      {"d_in", c.d_in},
      {"freqs", c.freqs},
      {"mlp_hidden", c.mlp_hidden},
      {"transformer_dropout", c.transformer_dropout},
      {"recurrent_dropout", c.recurrent_dropout},
      {"layer_dropout", c.layer_dropout},
      {"mamba",
       {{"expand", c.mamba.expand},
        {"state", c.mamba.state},
        {"conv_width", c.mamba.conv_width},
        {"delta_rank", c.mamba.delta_rank},
        {"d_skip", c.mamba.d_skip},
        {"scan", c.mamba.scan == ssm::ScanMode::kParallel ? "parallel" : "sequential"}}},
      {"seed", c.seed},
  };
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw UsageError("unknown " + where + " key '" + key + "'");
  }
}

}  // namespace

ModelConfig config_from_json(const json& j) {
  if (!j.is_object()) throw UsageError("model config must be a JSON object");
  reject_unknown(j,
                 {"binaural", "variant", "d", "pool", "layers", "d_in", "freqs", "mlp_hidden",
                  "transformer_dropout", "recurrent_dropout", "layer_dropout", "mamba", "seed"},
                 "config");
  ModelConfig c;
  read(j, "binaural", c.binaural);
  if (j.contains("variant")) {
    std::string name;
    read(j, "variant", name);
    c.variant = blocks::parse_variant(name);
  }
  read(j, "d", c.d);
  read(j, "pool", c.pool);
  read(j, "layers", c.layers);
  read(j, "d_in", c.d_in);
  read(j, "freqs", c.freqs);
  read(j, "mlp_hidden", c.mlp_hidden);
  read(j, "transformer_dropout", c.transformer_dropout);
  read(j, "recurrent_dropout", c.recurrent_dropout);
  read(j, "layer_dropout", c.layer_dropout);
  read(j, "seed", c.seed);
  if (j.contains("mamba")) {
    const json& m = j.at("mamba");
    if (!m.is_object()) throw UsageError("config key 'mamba' must be an object");
    reject_unknown(m, {"expand", "state", "conv_width", "delta_rank", "d_skip", "scan"},
                   "mamba config");
    read(m, "expand", c.mamba.expand);
    read(m, "state", c.mamba.state);
    read(m, "conv_width", c.mamba.conv_width);
    read(m, "delta_rank", c.mamba.delta_rank);
    read(m, "d_skip", c.mamba.d_skip);
    if (m.contains("scan")) {
      std::string scan;
      read(m, "scan", scan);
      if (scan == "sequential") {
        c.mamba.scan = ssm::ScanMode::kSequential;
      } else if (scan == "parallel") {
        c.mamba.scan = ssm::ScanMode::kParallel;
      } else {
        throw UsageError("mamba scan must be 'sequential' or 'parallel', got '" + scan + "'");
      }
    }
  }
  c.validate();
  return c;
}

template <typename S>
Tensor<S> pool_time(const Tensor<S>& x, std::size_t p) {
  if (p == 0) throw UsageError("pool_time: pooling size must be >= 1");
  if (x.rank() != 2) throw ShapeError("pool_time: expected T x D, got " + shape_str(x.shape()));
  const std::size_t t = x.dim(0), d = x.dim(1);
  if (t == 0) throw DataError("pool_time: sequence has no frames");
  if (p == 1) return x;
  const std::size_t out_t = (t + p - 1) / p;
  Tensor<S> out(Shape{out_t, d});
  for (std::size_t w = 0; w < out_t; ++w) {
    const std::size_t begin = w * p, end = std::min(t, begin + p);
    S* o = out.ptr() + w * d;
    for (std::size_t f = begin; f < end; ++f) {
      const S* row = x.ptr() + f * d;
      for (std::size_t j = 0; j < d; ++j) o[j] += row[j];
    }
    const S inv = S(1) / static_cast<S>(end - begin);
    for (std::size_t j = 0; j < d; ++j) o[j] *= inv;
  }
  return out;
}

template <typename S>
Tensor<S> normalize_features(const Tensor<S>& feats, const Tensor<double>& mean,
                             const Tensor<double>& std) {
  if (feats.rank() != 3) {
    throw ShapeError("normalize_features: expected L x T x D, got " + shape_str(feats.shape()));
  }
  const std::size_t l = feats.dim(0), t = feats.dim(1), d = feats.dim(2);
  if (mean.shape() != std.shape() || mean.rank() != 2 || mean.dim(1) != d ||
      (mean.dim(0) != l && mean.dim(0) != 1)) {
    throw ShapeError("normalize_features: features " + shape_str(feats.shape()) + " vs stats " +
                     shape_str(mean.shape()) + "/" + shape_str(std.shape()));
  }
  Tensor<S> out(feats.shape());
  for (std::size_t li = 0; li < l; ++li) {
    const std::size_t srow = mean.dim(0) == 1 ? 0 : li;
    for (std::size_t ti = 0; ti < t; ++ti) {
      const std::size_t base = (li * t + ti) * d;
      for (std::size_t j = 0; j < d; ++j) {
        const double sd = std::max(std.at(srow, j), kStdFloor);
        out[base + j] = static_cast<S>((static_cast<double>(feats[base + j]) - mean.at(srow, j)) / sd);
      }
    }
  }
  return out;
}

template <typename S>
ParamSet<S> declare_model(const ModelConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  ParamSet<S> ps;
  blocks::declare_linear(ps, "input_proj", cfg.d_in, cfg.d, true, rng);
  blocks::declare_linear(ps, "audiogram_proj", cfg.freqs, cfg.d, true, rng);
  if (cfg.binaural) {
    blocks::declare_binaural_temporal(ps, "temporal", cfg.variant, cfg.temporal(), rng);
  } else {
    blocks::declare_temporal(ps, "temporal", cfg.variant, cfg.temporal(), rng);
  }
  blocks::declare_temporal(ps, "layer", TemporalVariant::kTransformer, cfg.layer_transform(), rng);
  blocks::declare_linear(ps, "head", cfg.d, 1, true, rng);
  return ps;
}

std::size_t count_parameters(const ModelConfig& cfg) { return declare_model<float>(cfg).count(); }

std::size_t count_parameters(TemporalVariant v, bool binaural) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.binaural = binaural;
  return count_parameters(cfg);
}

template <typename S>
SipModel<S>::SipModel(const ModelConfig& cfg) : cfg_(cfg), params_(declare_model<S>(cfg)) {}

template <typename S>
SipModel<S>::SipModel(const ModelConfig& cfg, ParamSet<S> params)
    : cfg_(cfg), params_(std::move(params)) {
  const ParamSet<S> ref = declare_model<S>(cfg);
  if (ref.size() != params_.size()) {
    throw DataError("parameter set has " + std::to_string(params_.size()) +
                    " tensors, config expects " + std::to_string(ref.size()));
  }
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const std::string& name = ref.names()[i];
    if (!params_.contains(name)) throw DataError("missing parameter '" + name + "'");
    if (params_.get(name).shape() != ref.at(i).shape()) {
      throw DataError("parameter '" + name + "' has shape " +
                      shape_str(params_.get(name).shape()) + ", config expects " +
                      shape_str(ref.at(i).shape()));
    }
  }
}

template <typename S>
void SipModel<S>::check_features(const Tensor<S>& feats, const char* what) const {
  if (feats.rank() != 3 || feats.dim(0) != cfg_.layers || feats.dim(2) != cfg_.d_in ||
      feats.dim(1) == 0) {
    throw ShapeError(std::string(what) + ": features " + shape_str(feats.shape()) +
                     " do not match L=" + std::to_string(cfg_.layers) +
                     ", D_in=" + std::to_string(cfg_.d_in) + " with T >= 1");
  }
  if (!feats.all_finite()) throw DataError(std::string(what) + ": non-finite feature values");
}

template <typename S>
Var<S> SipModel<S>::project_layer(Graph<S>& g, const Tensor<S>& feats, std::size_t layer) const {
  const std::size_t t = feats.dim(1), d_in = feats.dim(2);
  Tensor<S> frames(Shape{t, d_in}, std::span<const S>(feats.ptr() + layer * t * d_in, t * d_in));
  return blocks::linear(g, "input_proj", g.constant(pool_time(frames, cfg_.pool)));
}

template <typename S>
Var<S> SipModel<S>::encode_layers(Graph<S>& g, const Tensor<S>& feats) const {
  check_features(feats, "encode_layers");
  const auto tcfg = cfg_.temporal();
  std::vector<Var<S>> rows;
  rows.reserve(cfg_.layers);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const Var<S> x = project_layer(g, feats, l);
    rows.push_back(ad::mean(blocks::temporal_block(g, "temporal", cfg_.variant, tcfg, x), 0));
  }
  return ad::concat(rows, 0);
}

template <typename S>
std::pair<Var<S>, Var<S>> SipModel<S>::encode_layers_binaural(Graph<S>& g, const Tensor<S>& left,
                                                              const Tensor<S>& right) const {
  check_features(left, "encode_layers_binaural (left)");
  check_features(right, "encode_layers_binaural (right)");
  if (left.shape() != right.shape()) {
    throw ShapeError("binaural channels differ: left " + shape_str(left.shape()) + " vs right " +
                     shape_str(right.shape()));
  }
  const auto tcfg = cfg_.temporal();
  std::vector<Var<S>> rows_l, rows_r;
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    auto [yl, yr] = blocks::binaural_temporal_block(g, "temporal", cfg_.variant, tcfg,
                                                    project_layer(g, left, l),
                                                    project_layer(g, right, l));
    rows_l.push_back(ad::mean(yl, 0));
    rows_r.push_back(ad::mean(yr, 0));
  }
  return {ad::concat(rows_l, 0), ad::concat(rows_r, 0)};
}

template <typename S>
Var<S> SipModel<S>::embed_audiogram(Graph<S>& g, const Tensor<S>& thresholds) const {
  if (thresholds.size() != cfg_.freqs) {
    throw ShapeError("audiogram has " + std::to_string(thresholds.size()) +
                     " thresholds, model expects " + std::to_string(cfg_.freqs));
  }
  Tensor<S> scaled(Shape{1, cfg_.freqs});
  for (std::size_t i = 0; i < cfg_.freqs; ++i) {
    const double v = static_cast<double>(thresholds[i]);
    if (!(v >= kMinThresholdDb && v <= kMaxThresholdDb)) {
      throw DataError("audiogram threshold " + std::to_string(v) + " dB HL outside [" +
                      std::to_string(kMinThresholdDb) + ", " + std::to_string(kMaxThresholdDb) +
                      "]");
    }
    scaled[i] = static_cast<S>(v / kAudiogramScaleDb);
  }
  return blocks::linear(g, "audiogram_proj", g.constant(std::move(scaled)));
}

template <typename S>
Var<S> SipModel<S>::pool_layers(Graph<S>& g, const Var<S>& layer_embs,
                                const Var<S>& audio_emb) const {
  const Var<S> stack = ad::concat<S>({layer_embs, audio_emb}, 0);
  const Var<S> y = blocks::temporal_block(g, "layer", TemporalVariant::kTransformer,
                                          cfg_.layer_transform(), stack);
  return ad::mean(y, 0);
}

template <typename S>
Var<S> SipModel<S>::head(Graph<S>& g, const Var<S>& pooled) const {
  return ad::scale(ad::sigmoid(blocks::linear(g, "head", pooled)), S(100));
}

template <typename S>
Var<S> SipModel<S>::layerwise_head(Graph<S>& g, const Var<S>& layer_embs,
                                   const Var<S>& audio_emb) const {
  return head(g, pool_layers(g, layer_embs, audio_emb));
}

template <typename S>
Var<S> SipModel<S>::forward_mono(Graph<S>& g, const Tensor<S>& feats,
                                 const Tensor<S>& audiogram) const {
  if (cfg_.binaural) throw UsageError("forward_mono called on a binaural model");
  return layerwise_head(g, encode_layers(g, feats), embed_audiogram(g, audiogram));
}

template <typename S>
Var<S> SipModel<S>::forward_binaural(Graph<S>& g, const Tensor<S>& feats_left,
                                     const Tensor<S>& feats_right,
                                     const Tensor<S>& audiogram_left,
                                     const Tensor<S>& audiogram_right) const {
  if (!cfg_.binaural) throw UsageError("forward_binaural called on a monaural model");
  auto [el, er] = encode_layers_binaural(g, feats_left, feats_right);
  const Var<S> pl = pool_layers(g, el, embed_audiogram(g, audiogram_left));
  const Var<S> pr = pool_layers(g, er, embed_audiogram(g, audiogram_right));
  return head(g, ad::scale(ad::add(pl, pr), S(0.5)));
}

template <typename S>
S SipModel<S>::predict_mono(const Tensor<S>& feats, const Tensor<S>& audiogram) const {
  Graph<S> g(params_, nullptr, Mode::kEval);
  return forward_mono(g, feats, audiogram).value().item();
}

template <typename S>
S SipModel<S>::predict_binaural(const Tensor<S>& feats_left, const Tensor<S>& feats_right,
                                const Tensor<S>& audiogram_left,
                                const Tensor<S>& audiogram_right) const {
  Graph<S> g(params_, nullptr, Mode::kEval);
  return forward_binaural(g, feats_left, feats_right, audiogram_left, audiogram_right)
      .value()
      .item();
}

template class SipModel<float>;
template class SipModel<double>;
template ParamSet<float> declare_model(const ModelConfig&);
template ParamSet<double> declare_model(const ModelConfig&);
template Tensor<float> pool_time(const Tensor<float>&, std::size_t);
template Tensor<double> pool_time(const Tensor<double>&, std::size_t);
template Tensor<float> normalize_features(const Tensor<float>&, const Tensor<double>&,
                                          const Tensor<double>&);
template Tensor<double> normalize_features(const Tensor<double>&, const Tensor<double>&,
                                           const Tensor<double>&);

}  // namespace sipm::model
