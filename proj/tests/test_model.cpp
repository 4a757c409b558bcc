// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "model/sip_model.hpp"
#include "numerics/kernels.hpp"
#include "support/suites.hpp"

using namespace sipm;
using namespace sipm::model;

namespace {

struct Published {
  TemporalVariant v;
  bool binaural;
  double millions;
};

const Published kTable[] = {
    {TemporalVariant::kTransformer, false, 4.05},   {TemporalVariant::kTransformerNoSkip, false, 4.05},
    {TemporalVariant::kTransformerNoMlp, false, 2.86}, {TemporalVariant::kUniMamba, false, 3.24},
    {TemporalVariant::kUniMambaSkip, false, 3.24},  {TemporalVariant::kUniMambaMlp, false, 4.42},
    {TemporalVariant::kBiMamba, false, 4.20},       {TemporalVariant::kBiMambaSkip, false, 4.20},
    {TemporalVariant::kBiMambaMlp, false, 5.38},    {TemporalVariant::kUniLstm, false, 3.46},
    {TemporalVariant::kBiLstm, false, 4.94},        {TemporalVariant::kTransformer, true, 5.23},
    {TemporalVariant::kUniMamba, true, 3.53},       {TemporalVariant::kUniMambaMlp, true, 4.72},
    {TemporalVariant::kBiMamba, true, 5.01},        {TemporalVariant::kBiMambaMlp, true, 6.27},
};

Tensor<float> randn(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n01(0.0f, 1.0f);
  Tensor<float> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = n01(rng);
  return t;
}

ModelConfig small(TemporalVariant v, bool binaural) {
  ModelConfig c;
  c.variant = v;
  c.binaural = binaural;
  c.d = 8;
  c.pool = 3;
  c.layers = 3;
  c.d_in = 5;
  c.freqs = 4;
  c.mamba.state = 4;
  c.seed = 5;
  return c;
}

Tensor<float> audiogram(std::size_t f, float base) {
  Tensor<float> a(Shape{f});
  for (std::size_t i = 0; i < f; ++i) a[i] = base + 5.0f * static_cast<float>(i);
  return a;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("parameter counts match the published sizes") {
  for (const Published& p : kTable) {
    const double m = static_cast<double>(count_parameters(p.v, p.binaural)) / 1e6;
    INFO(blocks::variant_name(p.v) << (p.binaural ? " binaural " : " mono ") << m);
    CHECK(std::abs(m - p.millions) / p.millions <= 0.02);
  }
}

TEST_CASE("removing the MLP block drops about 1.19 M") {
  const double drop = static_cast<double>(count_parameters(TemporalVariant::kTransformer, false) -
                                          count_parameters(TemporalVariant::kTransformerNoMlp, false)) / 1e6;
  CHECK(std::abs(drop - 1.19) / 1.19 <= 0.02);
}

TEST_CASE("counts do not depend on the pooling size") {
  ModelConfig c;
  c.variant = TemporalVariant::kBiMamba;
  const std::size_t base = count_parameters(c);
  for (std::size_t p : {1u, 5u, 10u, 40u}) {
    c.pool = p;
    CHECK(count_parameters(c) == base);
  }
}

TEST_CASE("temporal pooling") {
  const Tensor<float> x(Shape{4, 1}, {1, 2, 3, 4});
  CHECK(pool_time(x, 2) == Tensor<float>(Shape{2, 1}, {1.5f, 3.5f}));
  CHECK(pool_time(x, 1) == x);
  const Tensor<float> five(Shape{5, 1}, {1, 2, 3, 4, 5});
  const Tensor<float> p = pool_time(five, 2);
  REQUIRE(p.shape() == Shape{3, 1});
  CHECK(p[2] == 5.0f);
  CHECK(pool_time(five, 9) == Tensor<float>(Shape{1, 1}, {3.0f}));
  CHECK_THROWS_AS(pool_time(Tensor<float>(Shape{0, 3}), 2), DataError);
  CHECK_THROWS_AS(pool_time(x, 0), UsageError);
}

TEST_CASE("normalization") {
  const Tensor<float> feats = randn(Shape{2, 50, 3}, 1);
  Tensor<double> mean(Shape{2, 3}), sd(Shape{2, 3});
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0, s2 = 0;
      for (std::size_t t = 0; t < 50; ++t) s += feats[(l * 50 + t) * 3 + j];
      s /= 50;
      for (std::size_t t = 0; t < 50; ++t) s2 += std::pow(feats[(l * 50 + t) * 3 + j] - s, 2);
      mean.at(l, j) = s;
      sd.at(l, j) = std::sqrt(s2 / 50);
    }
  }
  const Tensor<float> z = normalize_features(feats, mean, sd);
  for (std::size_t l = 0; l < 2; ++l) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0, s2 = 0;
      for (std::size_t t = 0; t < 50; ++t) s += z[(l * 50 + t) * 3 + j];
      s /= 50;
      for (std::size_t t = 0; t < 50; ++t) s2 += std::pow(z[(l * 50 + t) * 3 + j] - s, 2);
      CHECK(std::abs(s) < 1e-5);
      CHECK(std::abs(std::sqrt(s2 / 50) - 1.0) < 1e-3);
    }
  }
  SUBCASE("a zero-variance dim maps to zero") {
    const Tensor<float> c(Shape{1, 4, 2}, 7.0f);
    const Tensor<float> y = normalize_features(c, Tensor<double>(Shape{1, 2}, 7.0), Tensor<double>(Shape{1, 2}, 0.0));
    CHECK(y == Tensor<float>(Shape{1, 4, 2}, 0.0f));
  }
  SUBCASE("shared stats apply to every layer") {
    const Tensor<float> y = normalize_features(feats, Tensor<double>(Shape{1, 3}, 1.0), Tensor<double>(Shape{1, 3}, 2.0));
    CHECK(y[0] == doctest::Approx((feats[0] - 1.0) / 2.0));
  }
  SUBCASE("mismatched stats are rejected") {
    CHECK_THROWS_AS(normalize_features(feats, Tensor<double>(Shape{2, 4}), Tensor<double>(Shape{2, 4})), ShapeError);
    CHECK_THROWS_AS(normalize_features(feats, Tensor<double>(Shape{3, 3}), Tensor<double>(Shape{3, 3})), ShapeError);
  }
}

TEST_CASE("config json round trip and validation") {
  ModelConfig c = small(TemporalVariant::kBiMambaMlp, true);
  c.mamba.scan = ssm::ScanMode::kParallel;
  const ModelConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"dd", 3}}), UsageError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"variant", "gru"}}), UsageError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"d", "wide"}}), UsageError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"mamba", {{"scan", "fast"}}}}), UsageError);
  ModelConfig bad = small(TemporalVariant::kUniLstm, true);
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = small(TemporalVariant::kUniMamba, false);
  bad.pool = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad.pool = 2;
  bad.recurrent_dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("adopting parameters checks names and shapes") {
  const ModelConfig c = small(TemporalVariant::kUniMamba, false);
  const SipModel<float> m(c);
  CHECK_NOTHROW(SipModel<float>(c, m.params()));
  ModelConfig other = c;
  other.d = 6;
  CHECK_THROWS_AS(SipModel<float>(other, m.params()), DataError);
  CHECK(m.param_count() == count_parameters(c));
}

TEST_CASE("a single encoder layer gives one embedding row") {
  ModelConfig c = small(TemporalVariant::kTransformer, false);
  c.layers = 1;
  const SipModel<float> m(c);
  Graph<float> g(m.params(), nullptr, Mode::kEval);
  CHECK(m.encode_layers(g, randn(Shape{1, 7, c.d_in}, 2)).shape() == Shape{1, c.d});
}

TEST_CASE("constant features give constant transformer frames") {
  for (TemporalVariant v : {TemporalVariant::kTransformer, TemporalVariant::kTransformerNoSkip,
                            TemporalVariant::kTransformerNoMlp}) {
    const ModelConfig c = small(v, false);
    const SipModel<float> m(c);
    Tensor<float> f(Shape{c.layers, 9, c.d_in});
    const Tensor<float> row = randn(Shape{c.layers * c.d_in}, 3);
    for (std::size_t l = 0; l < c.layers; ++l)
      for (std::size_t t = 0; t < 9; ++t)
        for (std::size_t j = 0; j < c.d_in; ++j) f[(l * 9 + t) * c.d_in + j] = row[l * c.d_in + j];
    Graph<float> g(m.params(), nullptr, Mode::kEval);
    const Tensor<float> emb = m.encode_layers(g, f).value();
    // Same features with a single frame: the mean over time equals the
    // transform of any one frame.
    Tensor<float> one(Shape{c.layers, 1, c.d_in});
    for (std::size_t l = 0; l < c.layers; ++l)
      for (std::size_t j = 0; j < c.d_in; ++j) one[l * c.d_in + j] = row[l * c.d_in + j];
    const Tensor<float> emb1 = m.encode_layers(g, one).value();
    for (std::size_t i = 0; i < emb.size(); ++i) CHECK(emb[i] == doctest::Approx(emb1[i]).epsilon(1e-5));
  }
}

TEST_CASE("audiogram embedding") {
  ModelConfig c = small(TemporalVariant::kUniMamba, false);
  SipModel<float> m(c);
  m.params().set("audiogram_proj.b", Tensor<float>(Shape{c.d}, 0.0f));
  Graph<float> g(m.params(), nullptr, Mode::kEval);
  CHECK(m.embed_audiogram(g, Tensor<float>(Shape{c.freqs}, 0.0f)).value() == Tensor<float>(Shape{1, c.d}, 0.0f));
  CHECK_THROWS_AS(m.embed_audiogram(g, Tensor<float>(Shape{c.freqs + 1}, 0.0f)), ShapeError);
  CHECK_THROWS_AS(m.embed_audiogram(g, Tensor<float>(Shape{c.freqs}, 130.0f)), DataError);
  CHECK_THROWS_AS(m.embed_audiogram(g, Tensor<float>(Shape{c.freqs}, -11.0f)), DataError);
}

TEST_CASE("zero head weights give sigmoid of the bias") {
  const ModelConfig c = small(TemporalVariant::kUniMamba, false);
  SipModel<float> m(c);
  m.params().set("head.w", Tensor<float>(Shape{c.d, 1}, 0.0f));
  m.params().set("head.b", Tensor<float>(Shape{1}, 0.0f));
  const Tensor<float> f = randn(Shape{c.layers, 10, c.d_in}, 4);
  CHECK(m.predict_mono(f, audiogram(c.freqs, 20.0f)) == 50.0f);
  m.params().set("head.b", Tensor<float>(Shape{1}, 1.0f));
  CHECK(m.predict_mono(f, audiogram(c.freqs, 20.0f)) == doctest::Approx(100.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("the layer-wise head ignores layer order") {
  const ModelConfig c = small(TemporalVariant::kUniMamba, false);
  const SipModel<float> m(c);
  Graph<float> g(m.params(), nullptr, Mode::kEval);
  const Tensor<float> rows = randn(Shape{c.layers, c.d}, 5);
  Tensor<float> perm(rows.shape());
  const std::size_t order[3] = {2, 0, 1};
  for (std::size_t l = 0; l < c.layers; ++l)
    for (std::size_t j = 0; j < c.d; ++j) perm.at(l, j) = rows.at(order[l], j);
  const Var<float> a = m.embed_audiogram(g, audiogram(c.freqs, 30.0f));
  const float y1 = m.layerwise_head(g, Var<float>::constant(rows), a).value()[0];
  const float y2 = m.layerwise_head(g, Var<float>::constant(perm), a).value()[0];
  CHECK(y1 == doctest::Approx(y2).epsilon(1e-5));
}

TEST_CASE("predictions stay within (0, 100)") {
  for (TemporalVariant v : blocks::kAllVariants) {
    const ModelConfig c = small(v, false);
    const SipModel<float> m(c);
    for (std::uint64_t s = 0; s < 3; ++s) {
      const float y = m.predict_mono(randn(Shape{c.layers, 11, c.d_in}, 10 + s), audiogram(c.freqs, 10.0f * s));
      INFO(blocks::variant_name(v));
      CHECK(y > 0.0f);
      CHECK(y < 100.0f);
    }
  }
}

TEST_CASE("binaural prediction") {
  for (TemporalVariant v : blocks::kBinauralVariants) {
    const ModelConfig c = small(v, true);
    SipModel<float> m(c);
    INFO(blocks::variant_name(v));
    // Tie the two cross-attention directions so both channels run the same
    // computation.
    if (blocks::is_transformer(v)) {
      for (const char* part : {".q.w", ".q.b", ".k.w", ".k.b", ".v.w", ".v.b", ".o.w", ".o.b"}) {
        m.params().set(std::string("temporal.xattn_r") + part,
                       m.params().get(std::string("temporal.xattn_l") + part));
      }
    }
    const Tensor<float> fl = randn(Shape{c.layers, 8, c.d_in}, 20);
    const Tensor<float> fr = randn(Shape{c.layers, 8, c.d_in}, 21);
    const Tensor<float> al = audiogram(c.freqs, 15.0f), ar = audiogram(c.freqs, 40.0f);

    SUBCASE("identical channels reduce to the single-channel head") {
      Graph<float> g(m.params(), nullptr, Mode::kEval);
      const auto enc = m.encode_layers_binaural(g, fl, fl);
      const float ref = m.head(g, m.pool_layers(g, enc.first, m.embed_audiogram(g, al))).value()[0];
      CHECK(m.predict_binaural(fl, fl, al, al) == doctest::Approx(ref).epsilon(1e-6));
    }
    SUBCASE("swapping channels changes nothing") {
      CHECK(m.predict_binaural(fl, fr, al, ar) == doctest::Approx(m.predict_binaural(fr, fl, ar, al)).epsilon(1e-5));
    }
    SUBCASE("mismatched channels are rejected") {
      CHECK_THROWS_AS(m.predict_binaural(fl, randn(Shape{c.layers, 8, c.d_in + 1}, 22), al, ar), ShapeError);
      CHECK_THROWS_AS(m.predict_mono(fl, al), UsageError);
    }
  }
}

TEST_CASE("mono models reject binaural calls and bad features") {
  const ModelConfig c = small(TemporalVariant::kUniMamba, false);
  const SipModel<float> m(c);
  const Tensor<float> f = randn(Shape{c.layers, 6, c.d_in}, 30);
  const Tensor<float> a = audiogram(c.freqs, 10.0f);
  CHECK_THROWS_AS(m.predict_binaural(f, f, a, a), UsageError);
  CHECK_THROWS_AS(m.predict_mono(randn(Shape{c.layers + 1, 6, c.d_in}, 31), a), ShapeError);
  CHECK_THROWS_AS(m.predict_mono(randn(Shape{c.layers, 0, c.d_in}, 31), a), ShapeError);
}

TEST_CASE("tiny models match finite differences end to end") {
  for (const auto& r : testing::model_gradient_suite()) {
    INFO(r.name << " error " << r.error);
    CHECK(r.ok());
  }
}

}  // TEST_SUITE
