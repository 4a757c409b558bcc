// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "data/dataset.hpp"
#include "json.hpp"
#include "model/sip_model.hpp"
#include "training/optimizer.hpp"

namespace sipm::training {

// Defaults are desk scale. The published recipe is lr 3e-5, warmup 2000,
// 80000 steps, batch 160.
struct TrainConfig {
  Schedule schedule{1e-3, 100, 2000};
  std::size_t batch_size = 16;
  AdamConfig adam;
  double huber_delta = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t validate_every = 100;  // 0: only after the last step
  double clip_norm = 0.0;              // 0: no clipping

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct ValidationPoint {
  std::uint64_t step = 0;
  double loss = 0.0;
  double rmse = 0.0;
  std::optional<double> ncc;
};

struct TrainHistory {
  std::vector<double> train_loss;  // one per step, train-mode batch mean
  std::vector<double> lr;
  std::vector<ValidationPoint> validation;
  std::uint64_t best_step = 0;
  double best_rmse = 0.0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  ParamSet<float> best;   // best validation RMSE (final parameters without a val set)
  ParamSet<float> final;
  AdamState optimizer;
  TrainHistory history;
};

using ProgressFn = std::function<void(std::uint64_t step, double loss, double lr)>;

// Single-sample forward in the model's mode of choice.
Var<float> forward_sample(const model::SipModel<float>& m, Graph<float>& g, const data::Sample& s);

// Eval-mode prediction in percent.
double predict_sample(const model::SipModel<float>& m, const data::Sample& s);

// Loss and per-parameter gradients of the mean Huber loss over `batch`.
// Sample i of the batch draws its dropout masks from seeds[i].
struct BatchGrad {
  double loss = 0.0;
  std::vector<Tensor<float>> grads;
};
BatchGrad batch_gradient(const model::SipModel<float>& m,
                         const std::vector<const data::Sample*>& batch,
                         const std::vector<std::uint64_t>& seeds, double huber_delta, Mode mode);

// Deterministic in (model init, data, config). Rejects an empty training set
// and aborts with the step index on a non-finite loss.
TrainResult train(const model::SipModel<float>& init, const std::vector<data::Sample>& train_set,
                  const std::vector<data::Sample>& val_set, const TrainConfig& cfg,
                  const ProgressFn& progress = {});

// Mixes (seed, a, b) into a well-spread 64-bit seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace sipm::training
