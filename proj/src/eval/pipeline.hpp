// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <vector>

#include "data/checkpoint.hpp"
#include "data/manifest.hpp"
#include "eval/metrics.hpp"
#include "training/training.hpp"

namespace sipm::eval {

// Eval-mode predictions for `entries` with the checkpoint's weights and
// normalization. Rejects entries whose channel count or feature dims do not
// fit the checkpoint's config.
MetricReport evaluate(const data::Checkpoint& ckpt, const std::vector<data::ManifestEntry>& entries,
                      const std::string& split);

struct RunSpec {
  model::ModelConfig model;
  training::TrainConfig train;
  bool per_layer_stats = true;
  std::string train_split = "train";
  std::string val_split = "val";
  std::string eval_split = "eval";
};

struct RunResult {
  data::Checkpoint checkpoint;  // best-by-validation weights, stats, optimizer
  training::TrainHistory history;
  MetricReport eval;
  std::size_t pooled_frames = 0;  // sequence length after temporal pooling
};

// Stats from the training split, training, then evaluation on the eval split.
RunResult train_and_evaluate(const RunSpec& spec, const std::vector<data::ManifestEntry>& entries,
                             const training::ProgressFn& progress = {});

// Training without evaluation; the checkpoint carries the history in its meta.
data::Checkpoint train_checkpoint(const RunSpec& spec,
                                  const std::vector<data::ManifestEntry>& entries,
                                  const training::ProgressFn& progress = {});

struct SweepRow {
  std::string variant;
  bool binaural = false;
  std::size_t pool = 0;
  std::size_t params = 0;
  std::size_t pooled_frames = 0;
  double rmse = 0.0;
  std::optional<double> ncc;
};

struct SweepReport {
  std::vector<std::size_t> pools;
  std::vector<SweepRow> rows;  // variant-major, pools in the given order

  // One line per variant: variant,binaural,params,rmse_p<p>... .
  std::string table_csv() const;
  // One line per run, including the pooled sequence length.
  std::string runs_csv() const;
  nlohmann::json to_json() const;
};

inline const std::vector<std::size_t> kDefaultPools = {20, 10, 5};

// Trains and evaluates one model per (variant, p) with identical seeds.
SweepReport pooling_sweep(const RunSpec& base, const std::vector<model::TemporalVariant>& variants,
                          const std::vector<std::size_t>& pools,
                          const std::vector<data::ManifestEntry>& entries,
                          const std::function<void(const std::string&)>& log = {});

}  // namespace sipm::eval
