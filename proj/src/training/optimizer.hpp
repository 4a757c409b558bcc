// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <vector>

#include "blocks/param_set.hpp"

namespace sipm::training {

// e = pred - target; 0.5 e^2 for |e| <= delta, delta (|e| - delta / 2)
// beyond. Averaged over the batch.
double huber_loss(const std::vector<double>& preds, const std::vector<double>& targets,
                  double delta);
// Scalar loss for one prediction, recorded on pred's tape.
template <typename S>
Var<S> huber(const Var<S>& pred, S target, S delta);

struct Schedule {
  double lr = 3e-5;
  std::uint64_t warmup_steps = 2000;
  std::uint64_t total_steps = 80000;

  void validate() const;
};

// Linear warmup to lr, then cosine decay to 0 at total_steps.
double lr_at(std::uint64_t step, const Schedule& s);

struct AdamConfig {
  double beta1 = 0.90;
  double beta2 = 0.98;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor<float>> m;
  std::vector<Tensor<float>> v;

  static AdamState zeros_like(const ParamSet<float>& params);
};

// One bias-corrected Adam update; grads are in declaration order.
void adam_step(ParamSet<float>& params, const std::vector<Tensor<float>>& grads, AdamState& state,
               double lr_now, const AdamConfig& cfg = {});

// Scales grads so their global L2 norm is at most max_norm; returns the norm
// before scaling.
double clip_grad_norm(std::vector<Tensor<float>>& grads, double max_norm);

}  // namespace sipm::training
