// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "training/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace sipm::training {

namespace {

double huber_value(double e, double delta) {
  const double a = std::abs(e);
  return a <= delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
}

}  // namespace

double huber_loss(const std::vector<double>& preds, const std::vector<double>& targets,
                  double delta) {
  if (preds.empty() && targets.empty()) throw UsageError("huber_loss: empty batch");
  if (preds.size() != targets.size()) {
    throw ShapeError("huber_loss: " + std::to_string(preds.size()) + " predictions vs " +
                     std::to_string(targets.size()) + " targets");
  }
  if (!(delta > 0.0)) throw UsageError("huber_loss: delta must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!std::isfinite(preds[i]) || !std::isfinite(targets[i])) {
      throw NumericError("huber_loss: non-finite input at index " + std::to_string(i));
    }
    sum += huber_value(preds[i] - targets[i], delta);
  }
  return sum / static_cast<double>(preds.size());
}

template <typename S>
Var<S> huber(const Var<S>& pred, S target, S delta) {
  if (pred.value().size() != 1) {
    throw ShapeError("huber: prediction must be a single value, got " + shape_str(pred.shape()));
  }
  if (!(delta > S(0))) throw UsageError("huber: delta must be positive");
  if (!std::isfinite(static_cast<double>(target))) throw NumericError("huber: non-finite target");
  const S e = pred.value()[0] - target;
  const S loss = static_cast<S>(huber_value(e, delta));
  check_finite<S>("huber", Tensor<S>::scalar(loss), {&pred});
  auto value = std::make_shared<const Tensor<S>>(Tensor<S>::scalar(loss));
  Tape<S>* tape = common_tape<S>({&pred}, "huber");
  if (!tape) return Var<S>::constant(value);
  const S slope = std::abs(e) <= delta ? e : (e > 0 ? delta : -delta);
  return tape->record("huber", value,
                      [pid = pred.id(), shape = pred.shape(), slope](const Tensor<S>& g, Tape<S>& t) {
                        t.accumulate(pid, Tensor<S>(shape, g[0] * slope));
                      });
}

void Schedule::validate() const {
  if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
  if (total_steps == 0) throw UsageError("total_steps must be positive");
  if (warmup_steps >= total_steps) throw UsageError("warmup_steps must be below total_steps");
}

double lr_at(std::uint64_t step, const Schedule& s) {
  s.validate();
  if (step > s.total_steps) {
    throw UsageError("lr_at: step " + std::to_string(step) + " beyond total_steps " +
                     std::to_string(s.total_steps));
  }
  if (step < s.warmup_steps) {
    return s.lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  }
  const double progress = static_cast<double>(step - s.warmup_steps) /
                          static_cast<double>(s.total_steps - s.warmup_steps);
  return s.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamState AdamState::zeros_like(const ParamSet<float>& params) {
  AdamState st;
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m.emplace_back(params.at(i).shape());
    st.v.emplace_back(params.at(i).shape());
  }
  return st;
}

void adam_step(ParamSet<float>& params, const std::vector<Tensor<float>>& grads, AdamState& state,
               double lr_now, const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients, " +
                     std::to_string(state.m.size()) + " moments");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string what = "adam_step '" + params.names()[i] + "'";
    require_shape(grads[i], params.at(i).shape(), what + " gradient");
    require_shape(state.m[i], params.at(i).shape(), what + " first moment");
    require_shape(state.v[i], params.at(i).shape(), what + " second moment");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<float> p = params.at(i);
    Tensor<float>& m = state.m[i];
    Tensor<float>& v = state.v[i];
    const Tensor<float>& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double update = lr_now * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.eps);
      p[j] = static_cast<float>(p[j] - update);
    }
    if (!p.all_finite()) {
      throw NumericError("adam_step: non-finite value in '" + params.names()[i] + "' at step " +
                         std::to_string(state.step));
    }
    params.set(i, std::move(p));
  }
}

double clip_grad_norm(std::vector<Tensor<float>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (std::size_t j = 0; j < g.size(); ++j) sq += static_cast<double>(g[j]) * g[j];
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const float s = static_cast<float>(max_norm / norm);
    for (auto& g : grads)
      for (std::size_t j = 0; j < g.size(); ++j) g[j] *= s;
  }
  return norm;
}

template Var<float> huber(const Var<float>&, float, float);
template Var<double> huber(const Var<double>&, double, double);

}  // namespace sipm::training
