// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "sipm/sipm.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "data/binary_io.hpp"
#include "data/checkpoint.hpp"
#include "data/dataset.hpp"
#include "data/feature_io.hpp"
#include "data/fixtures.hpp"
#include "data/manifest.hpp"
#include "data/norm_stats.hpp"
#include "eval/bench.hpp"
#include "eval/pipeline.hpp"
#include "training/training.hpp"

using nlohmann::json;

struct sipm_model {
  sipm::data::Checkpoint ckpt;
  sipm::model::SipModel<float> model;

  explicit sipm_model(sipm::data::Checkpoint c)
      : ckpt(std::move(c)), model(ckpt.config, ckpt.params) {}
};

namespace {

thread_local std::string g_last_error;

template <typename F>
sipm_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return SIPM_OK;
  } catch (const sipm::Error& e) {
    g_last_error = e.what();
    return static_cast<sipm_status>(static_cast<int>(e.kind()));
  } catch (const json::exception& e) {
    g_last_error = std::string("json: ") + e.what();
    return SIPM_ERR_USAGE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SIPM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SIPM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SIPM_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw sipm::UsageError(std::string(what) + " must not be NULL");
}

json parse_optional(const char* text, const char* what) {
  if (!text || !*text) return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw sipm::UsageError(std::string(what) + ": " + e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void set_out(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

sipm::Tensor<float> features_from(const float* p, std::size_t l, std::size_t t, std::size_t d) {
  require(p, "features");
  const std::size_t n = l * t * d;
  return sipm::Tensor<float>(sipm::Shape{l, t, d}, std::span<const float>(p, n));
}

sipm::Tensor<float> prepare(const sipm_model* m, sipm::Tensor<float> feats) {
  if (!m->ckpt.norm) return feats;
  return sipm::model::normalize_features(feats, m->ckpt.norm->mean, m->ckpt.norm->std);
}

template <typename T>
sipm::Tensor<float> audiogram_from(const T* p, std::size_t n) {
  require(p, "audiogram");
  sipm::Tensor<float> a(sipm::Shape{n});
  for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<float>(p[i]);
  return a;
}

struct RunOptions {
  sipm::eval::RunSpec spec;
  std::vector<sipm::model::TemporalVariant> variants;
  std::vector<std::size_t> pools = sipm::eval::kDefaultPools;
};

// Model dims the config leaves out are taken from the first manifest entry.
json with_data_dims(json model, const std::vector<sipm::data::ManifestEntry>& entries) {
  if (!model.is_object()) throw sipm::UsageError("config key 'model' must be an object");
  if (entries.empty()) return model;
  const auto& e = entries.front();
  const auto h = sipm::data::decode_feature_header(sipm::data::read_file(e.left), e.left.string());
  if (!model.contains("layers")) model["layers"] = h.layers;
  if (!model.contains("d_in")) model["d_in"] = h.dim;
  if (!model.contains("freqs")) model["freqs"] = e.audiogram_left.size();
  if (!model.contains("binaural")) model["binaural"] = e.binaural();
  return model;
}

RunOptions parse_run(const json& j, bool sweep,
                     const std::vector<sipm::data::ManifestEntry>& entries) {
  if (!j.is_object()) throw sipm::UsageError("run config must be a JSON object");
  RunOptions o;
  for (const auto& [key, value] : j.items()) {
    const bool common = key == "model" || key == "train" || key == "per_layer_stats" ||
                        key == "train_split" || key == "val_split" || key == "eval_split";
    const bool sweep_only = key == "variants" || key == "pools";
    if (!common && !(sweep && sweep_only)) {
      throw sipm::UsageError("unknown run config key '" + key + "'");
    }
  }
  o.spec.model = sipm::model::config_from_json(
      with_data_dims(j.contains("model") ? j.at("model") : json::object(), entries));
  if (j.contains("train")) o.spec.train = sipm::training::train_config_from_json(j.at("train"));
  o.spec.per_layer_stats = j.value("per_layer_stats", true);
  o.spec.train_split = j.value("train_split", o.spec.train_split);
  o.spec.val_split = j.value("val_split", o.spec.val_split);
  o.spec.eval_split = j.value("eval_split", o.spec.eval_split);
  if (sweep) {
    if (j.contains("variants")) {
      for (const auto& v : j.at("variants")) {
        o.variants.push_back(sipm::blocks::parse_variant(v.get<std::string>()));
      }
    }
    if (o.variants.empty()) o.variants.push_back(o.spec.model.variant);
    if (j.contains("pools")) o.pools = j.at("pools").get<std::vector<std::size_t>>();
  }
  return o;
}

}  // namespace

extern "C" {

SIPM_API const char* sipm_last_error(void) { return g_last_error.c_str(); }

SIPM_API const char* sipm_version(void) { return "0.1.0"; }

SIPM_API void sipm_string_free(char* s) { std::free(s); }

SIPM_API sipm_status sipm_model_create(const char* config_json, sipm_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    sipm::data::Checkpoint c;
    c.config = sipm::model::config_from_json(parse_optional(config_json, "model config"));
    c.params = sipm::model::declare_model<float>(c.config);
    *out = new sipm_model(std::move(c));
  });
}

SIPM_API sipm_status sipm_model_load(const char* checkpoint_path, sipm_model** out) {
  return guarded([&] {
    require(out, "out");
    require(checkpoint_path, "checkpoint_path");
    *out = nullptr;
    *out = new sipm_model(sipm::data::load_checkpoint(checkpoint_path));
  });
}

SIPM_API sipm_status sipm_model_save(const sipm_model* model, const char* checkpoint_path) {
  return guarded([&] {
    require(model, "model");
    require(checkpoint_path, "checkpoint_path");
    sipm::data::Checkpoint c = model->ckpt;
    c.params = model->model.params();
    sipm::data::save_checkpoint(checkpoint_path, c);
  });
}

SIPM_API void sipm_model_free(sipm_model* model) { delete model; }

SIPM_API sipm_status sipm_model_param_count(const sipm_model* model, size_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->model.param_count();
  });
}

SIPM_API sipm_status sipm_model_config(const sipm_model* model, char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(out_json, "out_json");
    *out_json = dup_string(sipm::model::config_to_json(model->model.config()).dump());
  });
}

SIPM_API sipm_status sipm_model_has_norm(const sipm_model* model, int* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->ckpt.norm ? 1 : 0;
  });
}

SIPM_API sipm_status sipm_param_count_variant(const char* variant, int binaural, size_t* out) {
  return guarded([&] {
    require(variant, "variant");
    require(out, "out");
    *out = sipm::model::count_parameters(sipm::blocks::parse_variant(variant), binaural != 0);
  });
}

SIPM_API sipm_status sipm_predict_mono(const sipm_model* model, const float* feats, size_t layers,
                                       size_t frames, size_t dim, const float* audiogram,
                                       size_t freqs, double* out_percent) {
  return guarded([&] {
    require(model, "model");
    require(out_percent, "out_percent");
    const auto f = prepare(model, features_from(feats, layers, frames, dim));
    *out_percent = model->model.predict_mono(f, audiogram_from(audiogram, freqs));
  });
}

SIPM_API sipm_status sipm_predict_binaural(const sipm_model* model, const float* feats_left,
                                           const float* feats_right, size_t layers, size_t frames,
                                           size_t dim, const float* audiogram_left,
                                           const float* audiogram_right, size_t freqs,
                                           double* out_percent) {
  return guarded([&] {
    require(model, "model");
    require(out_percent, "out_percent");
    const auto fl = prepare(model, features_from(feats_left, layers, frames, dim));
    const auto fr = prepare(model, features_from(feats_right, layers, frames, dim));
    *out_percent = model->model.predict_binaural(fl, fr, audiogram_from(audiogram_left, freqs),
                                                 audiogram_from(audiogram_right, freqs));
  });
}

SIPM_API sipm_status sipm_predict_files(const sipm_model* model, const char* left_path,
                                        const char* right_path, const double* audiogram_left,
                                        const double* audiogram_right, size_t freqs,
                                        double* out_percent) {
  return guarded([&] {
    require(model, "model");
    require(left_path, "left_path");
    require(out_percent, "out_percent");
    sipm::data::Sample s;
    s.id = left_path;
    s.left = prepare(model, sipm::data::read_features<float>(left_path));
    s.audiogram_left = audiogram_from(audiogram_left, freqs);
    if (right_path) {
      s.right = prepare(model, sipm::data::read_features<float>(right_path));
      s.audiogram_right = audiogram_from(audiogram_right, freqs);
    }
    *out_percent = sipm::training::predict_sample(model->model, s);
  });
}

SIPM_API sipm_status sipm_gen_fixtures(const char* spec_json, const char* out_dir,
                                       char** out_summary_json) {
  return guarded([&] {
    require(out_dir, "out_dir");
    const auto spec = sipm::data::fixture_spec_from_json(parse_optional(spec_json, "fixture spec"));
    const auto set = sipm::data::gen_fixtures(spec, out_dir);
    set_out(out_summary_json, json{{"manifest", set.manifest.string()},
                                   {"samples", set.entries.size()},
                                   {"spec", sipm::data::fixture_spec_to_json(spec)}}
                                  .dump());
  });
}

SIPM_API sipm_status sipm_compute_stats(const char* manifest_path, const char* split,
                                        int per_layer, const char* out_path) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    require(out_path, "out_path");
    const std::string sp = split ? split : "";
    const auto entries = sipm::data::select_split(sipm::data::load_manifest(manifest_path), sp);
    const auto stats = sipm::data::compute_norm_stats(entries, per_layer != 0, sp.empty() ? "all" : sp);
    sipm::data::save_norm_stats(out_path, stats);
  });
}

SIPM_API sipm_status sipm_train(const char* manifest_path, const char* run_json,
                                const char* out_checkpoint, sipm_progress_fn progress,
                                void* user, char** out_summary_json) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    require(out_checkpoint, "out_checkpoint");
    const auto entries = sipm::data::load_manifest(manifest_path);
    const RunOptions o = parse_run(parse_optional(run_json, "run config"), false, entries);
    sipm::training::ProgressFn fn;
    if (progress) fn = [&](std::uint64_t s, double l, double lr) { progress(s, l, lr, user); };
    const auto ckpt = sipm::eval::train_checkpoint(o.spec, entries, fn);
    sipm::data::save_checkpoint(out_checkpoint, ckpt);
    const json& h = ckpt.meta.at("history");
    const auto& losses = h.at("train_loss");
    set_out(out_summary_json,
            json{{"checkpoint", out_checkpoint},
                 {"params", ckpt.params.count()},
                 {"steps", losses.size()},
                 {"final_train_loss", losses.empty() ? json(nullptr) : losses.back()},
                 {"best_step", h.at("best_step")},
                 {"best_val_rmse", h.at("best_rmse")},
                 {"pooled_frames", ckpt.meta.at("pooled_frames")},
                 {"validation", h.at("validation")}}
                .dump());
  });
}

SIPM_API sipm_status sipm_evaluate(const char* checkpoint_path, const char* manifest_path,
                                   const char* split, char** out_report_json) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(manifest_path, "manifest_path");
    require(out_report_json, "out_report_json");
    const std::string sp = split ? split : "eval";
    const auto ckpt = sipm::data::load_checkpoint(checkpoint_path);
    const auto entries = sipm::data::select_split(sipm::data::load_manifest(manifest_path), sp);
    const auto report = sipm::eval::evaluate(ckpt, entries, sp);
    *out_report_json = dup_string(report.to_json().dump(2));
  });
}

SIPM_API sipm_status sipm_pooling_sweep(const char* manifest_path, const char* run_json,
                                        char** out_report_json) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    require(out_report_json, "out_report_json");
    const auto entries = sipm::data::load_manifest(manifest_path);
    const RunOptions o = parse_run(parse_optional(run_json, "run config"), true, entries);
    const auto report = sipm::eval::pooling_sweep(o.spec, o.variants, o.pools, entries);
    json j = report.to_json();
    j["table_csv"] = report.table_csv();
    j["runs_csv"] = report.runs_csv();
    *out_report_json = dup_string(j.dump(2));
  });
}

SIPM_API sipm_status sipm_bench_scaling(const char* bench_json, char** out_report_json) {
  return guarded([&] {
    require(out_report_json, "out_report_json");
    const json j = parse_optional(bench_json, "bench config");
    if (!j.is_object()) throw sipm::UsageError("bench config must be a JSON object");
    sipm::eval::BenchConfig cfg;
    for (const auto& [key, value] : j.items()) {
      if (key != "kinds" && key != "lengths" && key != "d" && key != "repetitions" &&
          key != "seed" && key != "min_seconds") {
        throw sipm::UsageError("unknown bench config key '" + key + "'");
      }
    }
    if (j.contains("kinds")) {
      cfg.kinds.clear();
      for (const auto& k : j.at("kinds")) cfg.kinds.push_back(sipm::eval::parse_bench_kind(k.get<std::string>()));
    }
    if (j.contains("lengths")) cfg.lengths = j.at("lengths").get<std::vector<std::size_t>>();
    cfg.d = j.value("d", cfg.d);
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.min_seconds = j.value("min_seconds", cfg.min_seconds);
    const auto report = sipm::eval::bench_scaling(cfg);
    json out = report.to_json();
    out["csv"] = report.to_csv();
    *out_report_json = dup_string(out.dump(2));
  });
}

}  // extern "C"
