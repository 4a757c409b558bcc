// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "training/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "eval/metrics.hpp"

namespace sipm::training {

using nlohmann::json;

void TrainConfig::validate() const {
  schedule.validate();
  if (batch_size == 0) throw UsageError("batch_size must be positive");
  if (!(huber_delta > 0.0)) throw UsageError("huber_delta must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw UsageError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw UsageError("Adam eps must be positive");
  if (clip_norm < 0.0) throw UsageError("clip_norm must be non-negative");
}

json train_config_to_json(const TrainConfig& c) {
  return json{{"lr", c.schedule.lr},
              {"warmup_steps", c.schedule.warmup_steps},
              {"total_steps", c.schedule.total_steps},
              {"batch_size", c.batch_size},
              {"beta1", c.adam.beta1},
              {"beta2", c.adam.beta2},
              {"eps", c.adam.eps},
              {"huber_delta", c.huber_delta},
              {"seed", c.seed},
              {"validate_every", c.validate_every},
              {"clip_norm", c.clip_norm}};
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw UsageError("training config must be a JSON object");
  TrainConfig c;
  const json defaults = train_config_to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw UsageError("unknown training config key '" + key + "'");
  }
  try {
    c.schedule.lr = j.value("lr", c.schedule.lr);
    c.schedule.warmup_steps = j.value("warmup_steps", c.schedule.warmup_steps);
    c.schedule.total_steps = j.value("total_steps", c.schedule.total_steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
    c.adam.eps = j.value("eps", c.adam.eps);
    c.huber_delta = j.value("huber_delta", c.huber_delta);
    c.seed = j.value("seed", c.seed);
    c.validate_every = j.value("validate_every", c.validate_every);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
  } catch (const json::exception& e) {
    throw UsageError(std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

json TrainHistory::to_json() const {
  json val = json::array();
  for (const auto& v : validation) {
    val.push_back({{"step", v.step},
                   {"loss", v.loss},
                   {"rmse", v.rmse},
                   {"ncc", v.ncc ? json(*v.ncc) : json(nullptr)}});
  }
  return json{{"train_loss", train_loss}, {"lr", lr},          {"validation", val},
              {"best_step", best_step},   {"best_rmse", best_rmse}};
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a simple combination.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Var<float> forward_sample(const model::SipModel<float>& m, Graph<float>& g,
                          const data::Sample& s) {
  if (m.config().binaural) {
    if (!s.binaural()) throw DataError("sample '" + s.id + "' has no right channel");
    return m.forward_binaural(g, s.left, s.right, s.audiogram_left, s.audiogram_right);
  }
  if (s.binaural()) throw DataError("sample '" + s.id + "' is binaural, model is monaural");
  return m.forward_mono(g, s.left, s.audiogram_left);
}

double predict_sample(const model::SipModel<float>& m, const data::Sample& s) {
  Graph<float> g(m.params(), nullptr, Mode::kEval);
  return forward_sample(m, g, s).value().item();
}

BatchGrad batch_gradient(const model::SipModel<float>& m,
                         const std::vector<const data::Sample*>& batch,
                         const std::vector<std::uint64_t>& seeds, double huber_delta, Mode mode) {
  if (batch.empty() || seeds.size() != batch.size()) {
    throw UsageError("batch_gradient: empty batch or seed count mismatch");
  }
  BatchGrad out;
  for (std::size_t i = 0; i < m.params().size(); ++i) out.grads.emplace_back(m.params().at(i).shape());
  const float inv_b = 1.0f / static_cast<float>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tape<float> tape;
    Graph<float> g(m.params(), &tape, mode, seeds[i]);
    const Var<float> pred = forward_sample(m, g, *batch[i]);
    const Var<float> loss = huber(pred, static_cast<float>(batch[i]->label),
                                  static_cast<float>(huber_delta));
    out.loss += static_cast<double>(loss.value().item()) / static_cast<double>(batch.size());
    const auto grads = g.collect(tape.backprop(ad::scale(loss, inv_b)));
    for (std::size_t k = 0; k < grads.size(); ++k) {
      float* acc = out.grads[k].ptr();
      const float* gk = grads[k].ptr();
      for (std::size_t j = 0; j < grads[k].size(); ++j) acc[j] += gk[j];
    }
  }
  return out;
}

namespace {

ValidationPoint validate_on(const model::SipModel<float>& m, const std::vector<data::Sample>& val,
                            double delta, std::uint64_t step) {
  std::vector<double> preds, targets;
  for (const auto& s : val) {
    preds.push_back(predict_sample(m, s));
    targets.push_back(s.label);
  }
  ValidationPoint p;
  p.step = step;
  p.loss = huber_loss(preds, targets, delta);
  p.rmse = eval::rmse(preds, targets);
  p.ncc = preds.size() >= 2 ? eval::try_ncc(preds, targets) : std::nullopt;
  return p;
}

}  // namespace

TrainResult train(const model::SipModel<float>& init, const std::vector<data::Sample>& train_set,
                  const std::vector<data::Sample>& val_set, const TrainConfig& cfg,
                  const ProgressFn& progress) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: training set is empty");

  model::SipModel<float> m(init.config(), init.params());
  TrainResult result;
  result.optimizer = AdamState::zeros_like(m.params());
  std::optional<ParamSet<float>> best;
  double best_rmse = std::numeric_limits<double>::infinity();

  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0, 0));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  std::size_t cursor = 0;
  const std::size_t bsz = std::min(cfg.batch_size, train_set.size());

  const std::uint64_t total = cfg.schedule.total_steps;
  for (std::uint64_t step = 1; step <= total; ++step) {
    std::vector<const data::Sample*> batch;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < bsz; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        cursor = 0;
      }
      batch.push_back(&train_set[order[cursor++]]);
      seeds.push_back(mix_seed(cfg.seed, step, i));
    }
    BatchGrad bg = batch_gradient(m, batch, seeds, cfg.huber_delta, Mode::kTrain);
    if (!std::isfinite(bg.loss)) {
      throw NumericError("train: non-finite loss at step " + std::to_string(step));
    }
    if (cfg.clip_norm > 0.0) clip_grad_norm(bg.grads, cfg.clip_norm);
    const double lr = lr_at(step, cfg.schedule);
    adam_step(m.params(), bg.grads, result.optimizer, lr, cfg.adam);
    result.history.train_loss.push_back(bg.loss);
    result.history.lr.push_back(lr);
    if (progress) progress(step, bg.loss, lr);

    const bool due = (cfg.validate_every > 0 && step % cfg.validate_every == 0) || step == total;
    if (due && !val_set.empty()) {
      ValidationPoint p = validate_on(m, val_set, cfg.huber_delta, step);
      if (p.rmse < best_rmse) {
        best_rmse = p.rmse;
        best = m.params();
        result.history.best_step = step;
        result.history.best_rmse = p.rmse;
      }
      result.history.validation.push_back(p);
    }
  }
  result.final = m.params();
  if (best) {
    result.best = std::move(*best);
  } else {
    result.best = m.params();
    result.history.best_step = total;
  }
  return result;
}

}  // namespace sipm::training
