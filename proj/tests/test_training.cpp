// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include <cmath>

#include "data/dataset.hpp"
#include "data/fixtures.hpp"
#include "data/norm_stats.hpp"
#include "doctest.h"
#include "support/temp_dir.hpp"
#include "training/optimizer.hpp"
#include "training/training.hpp"

using namespace sipm;
using namespace sipm::training;

namespace {

ParamSet<float> two_params() {
  ParamSet<float> ps;
  ps.add("a", Tensor<float>(Shape{2, 2}, {1.0f, -2.0f, 0.5f, 3.0f}));
  ps.add("b", Tensor<float>(Shape{3}, {0.1f, 0.2f, 0.3f}));
  return ps;
}

model::ModelConfig tiny_model() {
  model::ModelConfig c;
  c.variant = model::TemporalVariant::kUniMamba;
  c.d = 8;
  c.pool = 4;
  c.layers = 4;
  c.d_in = 32;
  c.freqs = 8;
  c.mamba.state = 4;
  c.seed = 3;
  return c;
}

struct TinyData {
  testing::TempDir dir{"train"};
  std::vector<data::Sample> train, val;
  explicit TinyData(std::size_t n_train) {
    data::FixtureSpec spec;
    spec.train = n_train;
    spec.val = 8;
    spec.eval = 0;
    const data::FixtureSet fx = data::gen_fixtures(spec, dir.path());
    const data::NormStats stats = data::compute_norm_stats(fx.entries, true, "train");
    train = data::load_samples(data::select_split(fx.entries, "train"), &stats);
    val = data::load_samples(data::select_split(fx.entries, "val"), &stats);
  }
};

}  // namespace

TEST_SUITE("training") {

TEST_CASE("huber loss") {
  CHECK(huber_loss({1.0}, {1.0}, 1.0) == 0.0);
  CHECK(huber_loss({2.0}, {1.0}, 1.0) == 0.5);
  CHECK(huber_loss({4.0}, {1.0}, 1.0) == 2.5);
  CHECK(huber_loss({-2.0}, {1.0}, 1.0) == 2.5);
  CHECK(huber_loss({4.0, 1.0}, {1.0, 1.0}, 1.0) == 1.25);
  CHECK_THROWS_AS(huber_loss({NAN}, {1.0}, 1.0), NumericError);
  CHECK_THROWS_AS(huber_loss({1.0}, {1.0, 2.0}, 1.0), ShapeError);
  CHECK_THROWS_AS(huber_loss({}, {}, 1.0), UsageError);
}

TEST_CASE("huber tape op") {
  Tape<double> tape;
  const Var<double> p = tape.leaf(Tensor<double>(Shape{1}, 4.0));
  const Var<double> l = huber(p, 1.0, 1.0);
  CHECK(l.value()[0] == 2.5);
  CHECK(tape.backprop(l).of(p)[0] == 1.0);
  Tape<double> t2;
  const Var<double> q = t2.leaf(Tensor<double>(Shape{1}, 1.5));
  CHECK(t2.backprop(huber(q, 1.0, 1.0)).of(q)[0] == 0.5);
}

TEST_CASE("learning rate schedule") {
  const Schedule s;  // published recipe
  CHECK(lr_at(0, s) == 0.0);
  CHECK(lr_at(1000, s) == doctest::Approx(1.5e-5));
  CHECK(lr_at(2000, s) == doctest::Approx(3e-5).epsilon(1e-12));
  CHECK(std::abs(lr_at(80000, s)) < 1e-12);
  CHECK(lr_at(41000, s) == doctest::Approx(1.5e-5));
  CHECK_THROWS_AS(lr_at(80001, s), UsageError);
  CHECK_THROWS_AS(lr_at(0, Schedule{1e-3, 10, 10}), UsageError);
  CHECK_THROWS_AS(lr_at(0, Schedule{0.0, 1, 10}), UsageError);
}

TEST_CASE("adam with a zero gradient leaves parameters alone") {
  ParamSet<float> ps = two_params();
  const ParamSet<float> before = ps;
  AdamState st = AdamState::zeros_like(ps);
  std::vector<Tensor<float>> g = {Tensor<float>(Shape{2, 2}, 0.0f), Tensor<float>(Shape{3}, 0.0f)};
  adam_step(ps, g, st, 1e-3);
  CHECK(st.step == 1);
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(ps.at(i) == before.at(i));
}

TEST_CASE("first adam step moves each weight by about lr against the gradient") {
  ParamSet<float> ps = two_params();
  const ParamSet<float> before = ps;
  AdamState st = AdamState::zeros_like(ps);
  std::vector<Tensor<float>> g = {Tensor<float>(Shape{2, 2}, {0.5f, -3.0f, 1e-2f, 7.0f}),
                                  Tensor<float>(Shape{3}, {-1.0f, 2.0f, -0.25f})};
  adam_step(ps, g, st, 1e-3);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t j = 0; j < ps.at(i).size(); ++j) {
      const double delta = static_cast<double>(ps.at(i)[j]) - before.at(i)[j];
      const double sign = g[i][j] > 0 ? -1.0 : 1.0;
      CHECK(delta * sign == doctest::Approx(1e-3).epsilon(1e-3));
    }
  }
}

TEST_CASE("adam rejects mismatched gradients") {
  ParamSet<float> ps = two_params();
  AdamState st = AdamState::zeros_like(ps);
  std::vector<Tensor<float>> g = {Tensor<float>(Shape{2, 2}, 0.0f)};
  CHECK_THROWS_AS(adam_step(ps, g, st, 1e-3), ShapeError);
  g.push_back(Tensor<float>(Shape{4}, 0.0f));
  CHECK_THROWS_AS(adam_step(ps, g, st, 1e-3), ShapeError);
  CHECK(st.step == 0);
}

TEST_CASE("gradient clipping") {
  std::vector<Tensor<float>> g = {Tensor<float>(Shape{2}, {3.0f, 0.0f}), Tensor<float>(Shape{1}, {4.0f})};
  CHECK(clip_grad_norm(g, 10.0) == doctest::Approx(5.0));
  CHECK(g[0][0] == 3.0f);
  CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(g[0][0] == doctest::Approx(0.6));
  CHECK(g[1][0] == doctest::Approx(0.8));
}

TEST_CASE("training config json") {
  TrainConfig c;
  c.schedule = Schedule{2e-3, 5, 50};
  c.batch_size = 4;
  c.seed = 9;
  const TrainConfig back = train_config_from_json(train_config_to_json(c));
  CHECK(train_config_to_json(back) == train_config_to_json(c));
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"epochs", 3}}), UsageError);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"batch_size", 0}}), UsageError);
}

TEST_CASE("seed mixing spreads nearby inputs") {
  CHECK(mix_seed(1, 2, 3) == mix_seed(1, 2, 3));
  CHECK(mix_seed(1, 2, 3) != mix_seed(1, 3, 2));
  CHECK(mix_seed(0, 0, 0) != mix_seed(0, 0, 1));
}

TEST_CASE("one small gradient step lowers the loss") {
  TinyData data(8);
  const model::SipModel<float> m(tiny_model());
  std::vector<const data::Sample*> batch;
  for (const auto& s : data.train) batch.push_back(&s);
  const std::vector<std::uint64_t> seeds(batch.size(), 0);
  const BatchGrad before = batch_gradient(m, batch, seeds, 1.0, Mode::kEval);
  ParamSet<float> stepped = m.params();
  for (std::size_t i = 0; i < stepped.size(); ++i) {
    Tensor<float> w = stepped.at(i);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= 1e-4f * before.grads[i][j];
    stepped.set(stepped.names()[i], std::move(w));
  }
  const BatchGrad after = batch_gradient(model::SipModel<float>(m.config(), stepped), batch, seeds, 1.0, Mode::kEval);
  CHECK(after.loss < before.loss);
}

TEST_CASE("training rejects an empty set") {
  const model::SipModel<float> m(tiny_model());
  CHECK_THROWS_AS(train(m, {}, {}, TrainConfig{}), DataError);
}

TEST_CASE("a tiny model overfits sixteen samples") {
  TinyData data(16);
  const model::SipModel<float> m(tiny_model());
  TrainConfig cfg;
  cfg.schedule = Schedule{1e-2, 50, 800};
  cfg.batch_size = 16;
  cfg.validate_every = 0;
  std::uint64_t last_step = 0;
  const TrainResult r = train(m, data.train, {}, cfg, [&](std::uint64_t s, double, double) { last_step = s; });
  CHECK(last_step == 800);
  CHECK(r.history.train_loss.size() == 800);
  const model::SipModel<float> fitted(m.config(), r.final);
  std::vector<double> preds, labels;
  for (const auto& s : data.train) {
    preds.push_back(predict_sample(fitted, s));
    labels.push_back(s.label);
  }
  const double loss = huber_loss(preds, labels, 1.0);
  MESSAGE("final train Huber loss " << loss);
  CHECK(loss < 1.0);
}

TEST_CASE("training is deterministic and keeps the best validation weights") {
  TinyData data(16);
  const model::SipModel<float> m(tiny_model());
  TrainConfig cfg;
  cfg.schedule = Schedule{5e-3, 5, 40};
  cfg.batch_size = 5;
  cfg.validate_every = 10;
  cfg.seed = 4;
  const TrainResult a = train(m, data.train, data.val, cfg);
  const TrainResult b = train(m, data.train, data.val, cfg);
  CHECK(a.history.to_json() == b.history.to_json());
  CHECK(a.final.flatten() == b.final.flatten());
  CHECK(a.best.flatten() == b.best.flatten());
  CHECK(a.optimizer.step == 40);
  REQUIRE(a.history.validation.size() == 4);
  double best = 1e300;
  for (const auto& v : a.history.validation) best = std::min(best, v.rmse);
  CHECK(a.history.best_rmse == best);
  const model::SipModel<float> chosen(m.config(), a.best);
  std::vector<double> preds, labels;
  for (const auto& s : data.val) {
    preds.push_back(predict_sample(chosen, s));
    labels.push_back(s.label);
  }
  double se = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) se += (preds[i] - labels[i]) * (preds[i] - labels[i]);
  CHECK(std::sqrt(se / preds.size()) == doctest::Approx(best).epsilon(1e-9));

  cfg.seed = 5;
  const TrainResult c = train(m, data.train, data.val, cfg);
  CHECK_FALSE(c.final.flatten() == a.final.flatten());
}

TEST_CASE("samples must fit the model") {
  TinyData data(4);
  model::ModelConfig cfg = tiny_model();
  cfg.binaural = true;
  const model::SipModel<float> m(cfg);
  CHECK_THROWS_AS(predict_sample(m, data.train[0]), DataError);
}

}  // TEST_SUITE
