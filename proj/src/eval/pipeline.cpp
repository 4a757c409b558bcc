// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "eval/pipeline.hpp"

#include <sstream>

#include "data/binary_io.hpp"
#include "data/dataset.hpp"
#include "data/feature_io.hpp"
#include "data/norm_stats.hpp"

namespace sipm::eval {

using nlohmann::json;

namespace {

void check_entries_fit(const model::ModelConfig& cfg,
                       const std::vector<data::ManifestEntry>& entries) {
  for (const auto& e : entries) {
    if (e.binaural() != cfg.binaural) {
      throw DataError("sample '" + e.id + "' is " + (e.binaural() ? "binaural" : "monaural") +
                      " but the model is " + (cfg.binaural ? "binaural" : "monaural"));
    }
    if (e.audiogram_left.size() != cfg.freqs ||
        (e.audiogram_right && e.audiogram_right->size() != cfg.freqs)) {
      throw DataError("sample '" + e.id + "': audiogram length differs from model F=" +
                      std::to_string(cfg.freqs));
    }
  }
  if (entries.empty()) return;
  const auto bytes = data::read_file(entries.front().left);
  const auto h = data::decode_feature_header(bytes, entries.front().left.string());
  if (h.layers != cfg.layers || h.dim != cfg.d_in) {
    throw DataError("features have L=" + std::to_string(h.layers) + ", D_in=" +
                    std::to_string(h.dim) + " but the model expects L=" +
                    std::to_string(cfg.layers) + ", D_in=" + std::to_string(cfg.d_in));
  }
}

std::size_t pooled_length(const std::vector<data::ManifestEntry>& entries, std::size_t pool) {
  if (entries.empty()) return 0;
  const auto h = data::decode_feature_header(data::read_file(entries.front().left),
                                             entries.front().left.string());
  return (h.frames + pool - 1) / pool;
}

}  // namespace

MetricReport evaluate(const data::Checkpoint& ckpt, const std::vector<data::ManifestEntry>& entries,
                      const std::string& split) {
  if (entries.empty()) throw DataError("evaluate: no samples in split '" + split + "'");
  check_entries_fit(ckpt.config, entries);
  const model::SipModel<float> m(ckpt.config, ckpt.params);
  const auto samples = data::load_samples(entries, ckpt.norm ? &*ckpt.norm : nullptr);
  std::vector<std::string> ids;
  std::vector<double> preds, targets;
  for (const auto& s : samples) {
    ids.push_back(s.id);
    preds.push_back(training::predict_sample(m, s));
    targets.push_back(s.label);
  }
  return make_report(split, std::move(ids), std::move(preds), std::move(targets));
}

data::Checkpoint train_checkpoint(const RunSpec& spec,
                                  const std::vector<data::ManifestEntry>& entries,
                                  const training::ProgressFn& progress) {
  spec.model.validate();
  spec.train.validate();
  const auto train_entries = data::select_split(entries, spec.train_split);
  const auto val_entries = data::select_split(entries, spec.val_split);
  if (train_entries.empty()) {
    throw DataError("no samples in training split '" + spec.train_split + "'");
  }
  check_entries_fit(spec.model, train_entries);
  check_entries_fit(spec.model, val_entries);

  data::NormStats stats =
      data::compute_norm_stats(train_entries, spec.per_layer_stats, spec.train_split);
  const auto train_set = data::load_samples(train_entries, &stats);
  const auto val_set = data::load_samples(val_entries, &stats);

  const model::SipModel<float> init(spec.model);
  training::TrainResult r = training::train(init, train_set, val_set, spec.train, progress);

  data::Checkpoint ckpt;
  ckpt.config = spec.model;
  ckpt.params = std::move(r.best);
  ckpt.norm = std::move(stats);
  ckpt.optimizer = std::move(r.optimizer);
  ckpt.meta = json{{"train_config", training::train_config_to_json(spec.train)},
                   {"train_split", spec.train_split},
                   {"val_split", spec.val_split},
                   {"train_samples", train_set.size()},
                   {"val_samples", val_set.size()},
                   {"pooled_frames", pooled_length(train_entries, spec.model.pool)},
                   {"optimizer_state", "after the last step"},
                   {"history", r.history.to_json()}};
  return ckpt;
}

RunResult train_and_evaluate(const RunSpec& spec, const std::vector<data::ManifestEntry>& entries,
                             const training::ProgressFn& progress) {
  RunResult out;
  out.checkpoint = train_checkpoint(spec, entries, progress);
  const json& h = out.checkpoint.meta.at("history");
  out.history.train_loss = h.at("train_loss").get<std::vector<double>>();
  out.history.lr = h.at("lr").get<std::vector<double>>();
  out.history.best_step = h.at("best_step").get<std::uint64_t>();
  out.history.best_rmse = h.at("best_rmse").get<double>();
  for (const auto& v : h.at("validation")) {
    training::ValidationPoint p;
    p.step = v.at("step").get<std::uint64_t>();
    p.loss = v.at("loss").get<double>();
    p.rmse = v.at("rmse").get<double>();
    if (!v.at("ncc").is_null()) p.ncc = v.at("ncc").get<double>();
    out.history.validation.push_back(p);
  }
  out.pooled_frames = out.checkpoint.meta.at("pooled_frames").get<std::size_t>();
  out.eval = evaluate(out.checkpoint, data::select_split(entries, spec.eval_split), spec.eval_split);
  return out;
}

std::string SweepReport::table_csv() const {
  std::ostringstream out;
  out << "variant,binaural,params";
  for (std::size_t p : pools) out << ",rmse_p" << p;
  out << '\n';
  for (std::size_t i = 0; i + pools.size() <= rows.size(); i += pools.size()) {
    out << rows[i].variant << ',' << (rows[i].binaural ? 1 : 0) << ',' << rows[i].params;
    out.precision(6);
    out << std::fixed;
    for (std::size_t k = 0; k < pools.size(); ++k) out << ',' << rows[i + k].rmse;
    out.unsetf(std::ios::floatfield);
    out << '\n';
  }
  return out.str();
}

std::string SweepReport::runs_csv() const {
  std::ostringstream out;
  out << "variant,binaural,pool,params,pooled_frames,rmse,ncc\n";
  out.precision(6);
  for (const auto& r : rows) {
    out << r.variant << ',' << (r.binaural ? 1 : 0) << ',' << r.pool << ',' << r.params << ','
        << r.pooled_frames << ',' << std::fixed << r.rmse << ',';
    if (r.ncc) out << *r.ncc;
    out.unsetf(std::ios::floatfield);
    out << '\n';
  }
  return out.str();
}

json SweepReport::to_json() const {
  json rs = json::array();
  for (const auto& r : rows) {
    rs.push_back({{"variant", r.variant},
                  {"binaural", r.binaural},
                  {"pool", r.pool},
                  {"params", r.params},
                  {"pooled_frames", r.pooled_frames},
                  {"rmse", r.rmse},
                  {"ncc", r.ncc ? json(*r.ncc) : json(nullptr)}});
  }
  return json{{"format", "sipm-pooling-sweep"}, {"version", 1}, {"pools", pools}, {"runs", rs}};
}

SweepReport pooling_sweep(const RunSpec& base, const std::vector<model::TemporalVariant>& variants,
                          const std::vector<std::size_t>& pools,
                          const std::vector<data::ManifestEntry>& entries,
                          const std::function<void(const std::string&)>& log) {
  if (pools.empty() || variants.empty()) throw UsageError("pooling sweep needs variants and pools");
  for (std::size_t p : pools) {
    if (p == 0) throw UsageError("pooling sizes must be >= 1");
  }
  SweepReport report;
  report.pools = pools;
  for (auto v : variants) {
    for (std::size_t p : pools) {
      RunSpec spec = base;
      spec.model.variant = v;
      spec.model.pool = p;
      const RunResult r = train_and_evaluate(spec, entries);
      SweepRow row;
      row.variant = std::string(blocks::variant_name(v));
      row.binaural = spec.model.binaural;
      row.pool = p;
      row.params = r.checkpoint.params.count();
      row.pooled_frames = r.pooled_frames;
      row.rmse = r.eval.rmse;
      row.ncc = r.eval.ncc;
      if (log) {
        log(row.variant + " p=" + std::to_string(p) + " frames=" +
            std::to_string(row.pooled_frames) + " params=" + std::to_string(row.params) +
            " rmse=" + std::to_string(row.rmse));
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace sipm::eval
