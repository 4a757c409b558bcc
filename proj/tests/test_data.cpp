// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include <cmath>
#include <cstring>
#include <random>

#include "data/binary_io.hpp"
#include "data/checkpoint.hpp"
#include "data/dataset.hpp"
#include "data/feature_io.hpp"
#include "data/fixtures.hpp"
#include "data/manifest.hpp"
#include "data/norm_stats.hpp"
#include "doctest.h"
#include "support/temp_dir.hpp"

using namespace sipm;
using namespace sipm::data;
using sipm::testing::slurp;
using sipm::testing::spit;
using sipm::testing::TempDir;
namespace fs = std::filesystem;

namespace {

template <typename S>
Tensor<S> randn(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Tensor<S> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(n01(rng));
  return t;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

// All regular files under root, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

const char* kHeader = "{\"format\":\"sipm-manifest\",\"version\":1}\n";

ManifestEntry entry(const std::string& id, const fs::path& dir, double label) {
  ManifestEntry e;
  e.id = id;
  e.left = dir / (id + ".sipf");
  e.audiogram_left = {10, 20, 30};
  e.label = label;
  e.split = "train";
  return e;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("feature files round trip bit for bit") {
  TempDir dir("feat");
  const Tensor<float> f = randn<float>(Shape{4, 10, 16}, 1);
  write_features(dir / "a.sipf", f);
  CHECK(read_features<float>(dir / "a.sipf") == f);
  CHECK(fs::file_size(dir / "a.sipf") == kFeatureHeaderBytes + f.size() * 4);
  const Tensor<double> d = randn<double>(Shape{2, 3, 5}, 2);
  write_features(dir / "b.sipf", d);
  CHECK(read_features<double>(dir / "b.sipf") == d);
  const FeatureHeader h = decode_feature_header(read_file(dir / "b.sipf"), "b");
  CHECK(h.precision == Precision::kF64);
  CHECK(h.layers == 2);
  CHECK(h.frames == 3);
  CHECK(h.dim == 5);
  // f64 files read as f32 convert elementwise.
  CHECK(read_features<float>(dir / "b.sipf") == d.cast<float>());
}

TEST_CASE("minimal feature file") {
  const Tensor<float> one(Shape{1, 1, 1}, {2.5f});
  const std::vector<char> bytes = encode_features(one);
  CHECK(bytes.size() == kFeatureHeaderBytes + 4);
  CHECK(decode_features<float>(bytes, "mem") == one);
}

TEST_CASE("corrupt feature files are rejected") {
  const std::vector<char> good = encode_features(randn<float>(Shape{2, 3, 4}, 3));
  SUBCASE("truncated payload names both sizes") {
    std::vector<char> bad(good.begin(), good.end() - 8);
    const std::string msg = error_of([&] { decode_features<float>(bad, "cut"); });
    CHECK(msg.find(std::to_string(2 * 3 * 4 * 4 - 8)) != std::string::npos);
    CHECK(msg.find(std::to_string(2 * 3 * 4 * 4)) != std::string::npos);
    CHECK(msg.find("offset") != std::string::npos);
  }
  SUBCASE("extra payload") {
    std::vector<char> bad = good;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_features<float>(bad, "long"), DataError);
  }
  SUBCASE("bad magic") {
    std::vector<char> bad = good;
    bad[0] = 'X';
    CHECK(error_of([&] { decode_features<float>(bad, "m"); }).find("magic") != std::string::npos);
  }
  SUBCASE("bad version") {
    std::vector<char> bad = good;
    bad[4] = 9;
    CHECK(error_of([&] { decode_features<float>(bad, "v"); }).find("version") != std::string::npos);
  }
  SUBCASE("bad precision") {
    std::vector<char> bad = good;
    bad[20] = 7;
    CHECK(error_of([&] { decode_features<float>(bad, "p"); }).find("precision") != std::string::npos);
  }
  SUBCASE("zero dims") {
    std::vector<char> bad = good;
    std::memset(&bad[8], 0, 4);
    CHECK_THROWS_AS(decode_features<float>(bad, "z"), DataError);
  }
  SUBCASE("truncated header") {
    std::vector<char> bad(good.begin(), good.begin() + 10);
    CHECK(error_of([&] { decode_features<float>(bad, "h"); }).find("truncated") != std::string::npos);
  }
  SUBCASE("non-finite values") {
    std::vector<char> bad = good;
    const float nan = NAN;
    std::memcpy(&bad[kFeatureHeaderBytes], &nan, 4);
    CHECK_THROWS_AS(decode_features<float>(bad, "n"), DataError);
  }
  CHECK_THROWS_AS(encode_features(Tensor<float>(Shape{2, 3})), ShapeError);
  CHECK_THROWS_AS(read_features<float>("/nonexistent/x.sipf"), DataError);
}

TEST_CASE("manifests") {
  TempDir dir("manifest");
  SUBCASE("an empty file holds no entries") {
    spit(dir / "m.jsonl", "");
    CHECK(load_manifest(dir / "m.jsonl").empty());
  }
  SUBCASE("entries keep file order and resolve paths") {
    std::string text = kHeader;
    for (const char* id : {"c", "a", "b"}) {
      spit(dir / (std::string(id) + ".sipf"), "");
      text += std::string("{\"id\":\"") + id +
              "\",\"left\":\"" + id + ".sipf\",\"audiogram_left\":[1,2],\"label\":50,\"split\":\"train\"}\n";
    }
    spit(dir / "m.jsonl", text);
    const auto es = load_manifest(dir / "m.jsonl");
    REQUIRE(es.size() == 3);
    CHECK(es[0].id == "c");
    CHECK(es[1].id == "a");
    CHECK(es[2].id == "b");
    CHECK(es[0].left == dir / "c.sipf");
    CHECK_FALSE(es[0].binaural());
    CHECK(select_split(es, "train").size() == 3);
    CHECK(select_split(es, "eval").empty());
    CHECK(select_split(es, "").size() == 3);
  }
  SUBCASE("an out-of-range label is reported at its line") {
    spit(dir / "x.sipf", "");
    spit(dir / "m.jsonl", std::string(kHeader) +
                              "{\"id\":\"x\",\"left\":\"x.sipf\",\"audiogram_left\":[1],\"label\":101,\"split\":\"train\"}\n");
    const std::string msg = error_of([&] { load_manifest(dir / "m.jsonl"); });
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("label") != std::string::npos);
  }
  SUBCASE("malformed records") {
    spit(dir / "x.sipf", "");
    const std::string ok = "{\"id\":\"x\",\"left\":\"x.sipf\",\"audiogram_left\":[1],\"label\":1,\"split\":\"train\"}\n";
    for (const std::string& body : {
             std::string("{not json\n"),
             std::string("{\"id\":\"x\",\"left\":\"x.sipf\",\"label\":1,\"split\":\"train\"}\n"),
             ok + ok,
             std::string("{\"id\":\"x\",\"left\":\"x.sipf\",\"audiogram_left\":[1],\"label\":1,\"split\":\"train\",\"extra\":1}\n"),
             std::string("{\"id\":\"y\",\"left\":\"y.sipf\",\"audiogram_left\":[1],\"label\":1,\"split\":\"train\"}\n"),
             std::string("{\"id\":\"x\",\"left\":\"x.sipf\",\"right\":\"x.sipf\",\"audiogram_left\":[1],\"label\":1,\"split\":\"train\"}\n"),
         }) {
      spit(dir / "m.jsonl", std::string(kHeader) + body);
      CHECK_THROWS_AS(load_manifest(dir / "m.jsonl"), DataError);
    }
    spit(dir / "m.jsonl", ok);
    CHECK(error_of([&] { load_manifest(dir / "m.jsonl"); }).find("header") != std::string::npos);
    CHECK_THROWS_AS(load_manifest(dir / "missing.jsonl"), DataError);
  }
  SUBCASE("write then load") {
    std::vector<ManifestEntry> es = {entry("a", dir.path(), 12.5), entry("b", dir.path(), 99.0)};
    es[1].right = dir / "b.R.sipf";
    es[1].audiogram_right = std::vector<double>{5, 6, 7};
    es[1].split = "eval";
    write_manifest(dir / "m.jsonl", es);
    const auto back = load_manifest(dir / "m.jsonl", false);
    REQUIRE(back.size() == 2);
    CHECK(back[0].label == 12.5);
    CHECK(back[1].right == es[1].right);
    CHECK(back[1].audiogram_right == es[1].audiogram_right);
    CHECK(back[1].split == "eval");
    CHECK_THROWS_AS(load_manifest(dir / "m.jsonl", true), DataError);
  }
}

TEST_CASE("normalization statistics") {
  SUBCASE("a constant sample") {
    NormAccumulator acc(1, 3, true);
    acc.add(Tensor<float>(Shape{1, 5, 3}, 4.0f));
    const NormStats s = acc.finish("train");
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(s.mean[j] == 4.0);
      CHECK(s.std[j] == 1e-8);
    }
    CHECK(s.frames == 5);
  }
  SUBCASE("two samples use the population variance") {
    NormAccumulator acc(2, 2, true);
    acc.add(Tensor<float>(Shape{2, 3, 2}, 0.0f));
    acc.add(Tensor<float>(Shape{2, 3, 2}, 2.0f));
    const NormStats s = acc.finish("train");
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(s.mean[i] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(s.std[i] == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("shared rows pool all layers") {
    NormAccumulator acc(2, 1, false);
    Tensor<float> f(Shape{2, 1, 1}, {0.0f, 4.0f});
    acc.add(f);
    const NormStats s = acc.finish("all");
    CHECK(s.mean.shape() == Shape{1, 1});
    CHECK(s.mean[0] == 2.0);
    CHECK(s.std[0] == 2.0);
    CHECK_THROWS_AS(acc.add(Tensor<float>(Shape{3, 1, 1})), ShapeError);
  }
  SUBCASE("no frames") {
    NormAccumulator acc(1, 1, true);
    CHECK_THROWS_AS(acc.finish("x"), DataError);
  }
}

TEST_CASE("stats over fixtures normalize to zero mean and unit std") {
  TempDir dir("stats");
  FixtureSpec spec;
  spec.train = 12;
  spec.val = 2;
  spec.eval = 2;
  spec.binaural = true;
  const FixtureSet fx = gen_fixtures(spec, dir.path());
  const auto train = select_split(fx.entries, "train");
  const NormStats s = compute_norm_stats(train, true, "train");
  CHECK(s.mean.shape() == Shape{spec.layers, spec.dim});
  CHECK(s.frames == 2 * spec.train * spec.frames);
  const auto samples = load_samples(train, &s);
  NormAccumulator again(spec.layers, spec.dim, true);
  for (const auto& x : samples) {
    again.add(x.left);
    again.add(x.right);
  }
  const NormStats z = again.finish("check");
  for (std::size_t i = 0; i < z.mean.size(); ++i) {
    CHECK(std::abs(z.mean[i]) < 1e-4);
    CHECK(std::abs(z.std[i] - 1.0) < 1e-3);
  }
  SUBCASE("json and file round trip") {
    save_norm_stats(dir / "stats.json", s);
    const NormStats back = load_norm_stats(dir / "stats.json");
    CHECK(back.mean == s.mean);
    CHECK(back.std == s.std);
    CHECK(back.split == "train");
    CHECK(back.per_layer);
    CHECK(back.frames == s.frames);
    nlohmann::json j = stats_to_json(s);
    j["std"][0][0] = -1.0;
    CHECK_THROWS_AS(stats_from_json(j), DataError);
    CHECK_THROWS_AS(stats_from_json(nlohmann::json{{"format", "other"}}), DataError);
  }
  CHECK_THROWS_AS(compute_norm_stats(select_split(fx.entries, "nope"), true, "nope"), DataError);
}

TEST_CASE("fixtures") {
  FixtureSpec spec;
  spec.train = 5;
  spec.val = 2;
  spec.eval = 3;
  spec.binaural = true;
  SUBCASE("the same seed gives byte-identical trees") {
    TempDir a("fxa"), b("fxb");
    gen_fixtures(spec, a.path());
    gen_fixtures(spec, b.path());
    const auto ta = tree(a.path()), tb = tree(b.path());
    CHECK(ta.size() == 2 * 10 + 2);
    CHECK(ta == tb);
    spec.seed = 8;
    TempDir c("fxc");
    gen_fixtures(spec, c.path());
    CHECK_FALSE(tree(c.path()) == ta);
  }
  SUBCASE("labels follow the planted rule") {
    TempDir dir("fxr");
    const FixtureSet fx = gen_fixtures(spec, dir.path());
    const auto es = load_manifest(fx.manifest);
    REQUIRE(es.size() == 10);
    CHECK(es[0].id == "train-0000");
    CHECK(es[9].id == "eval-0002");
    for (std::size_t i = 0; i < es.size(); ++i) {
      auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / v.size();
      };
      const double h = 0.5 * ((mean(es[i].audiogram_left) / 40.0 - 1.0) + (mean(*es[i].audiogram_right) / 40.0 - 1.0));
      CHECK(fx.planted[i].hearing == doctest::Approx(h).epsilon(1e-9));
      const double label = 100.0 / (1.0 + std::exp(-(1.5 * fx.planted[i].latent - h)));
      CHECK(es[i].label == doctest::Approx(label).epsilon(1e-9));
      CHECK(es[i].audiogram_left.size() == spec.freqs);
      for (double t : es[i].audiogram_left) {
        CHECK(t >= 0.0);
        CHECK(t <= 80.0);
      }
    }
    const auto f = read_features<float>(es[0].left);
    CHECK(f.shape() == Shape{spec.layers, spec.frames, spec.dim});
    CHECK(fs::exists(dir / "planted.json"));
  }
  SUBCASE("zero samples give an empty manifest and no files") {
    TempDir dir("fx0");
    spec.train = spec.val = spec.eval = 0;
    const FixtureSet fx = gen_fixtures(spec, dir.path());
    CHECK(fx.entries.empty());
    CHECK(load_manifest(fx.manifest).empty());
    CHECK(tree(dir.path()).size() == 1);
  }
  SUBCASE("spec json") {
    CHECK(fixture_spec_to_json(fixture_spec_from_json(fixture_spec_to_json(spec))) == fixture_spec_to_json(spec));
    CHECK_THROWS_AS(fixture_spec_from_json(nlohmann::json{{"samples", 3}}), UsageError);
    CHECK_THROWS_AS(fixture_spec_from_json(nlohmann::json{{"dim", 0}}), UsageError);
  }
}

TEST_CASE("checkpoints") {
  TempDir dir("ckpt");
  model::ModelConfig cfg;
  cfg.variant = model::TemporalVariant::kBiMamba;
  cfg.d = 8;
  cfg.layers = 2;
  cfg.d_in = 6;
  cfg.freqs = 3;
  cfg.mamba.state = 4;
  const model::SipModel<float> m(cfg);
  Checkpoint ck;
  ck.config = cfg;
  ck.params = m.params();
  NormStats ns;
  ns.mean = Tensor<double>(Shape{2, 6}, 0.25);
  ns.std = Tensor<double>(Shape{2, 6}, 2.0);
  ns.split = "train";
  ns.frames = 10;
  ck.norm = ns;
  training::AdamState st = training::AdamState::zeros_like(ck.params);
  st.step = 17;
  st.m[0][0] = 0.5f;
  ck.optimizer = st;
  ck.meta = {{"note", "x"}};

  save_checkpoint(dir / "a.ckpt", ck);
  const Checkpoint back = load_checkpoint(dir / "a.ckpt");
  CHECK(back.params.names() == ck.params.names());
  CHECK(back.params.flatten() == ck.params.flatten());
  REQUIRE(back.norm.has_value());
  CHECK(back.norm->mean == ns.mean);
  REQUIRE(back.optimizer.has_value());
  CHECK(back.optimizer->step == 17);
  CHECK(back.optimizer->m[0][0] == 0.5f);
  CHECK(back.meta == ck.meta);
  save_checkpoint(dir / "b.ckpt", back);
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));

  SUBCASE("without optional sections") {
    Checkpoint bare;
    bare.config = cfg;
    bare.params = m.params();
    const Checkpoint b2 = decode_checkpoint(encode_checkpoint(bare), "mem");
    CHECK_FALSE(b2.norm.has_value());
    CHECK_FALSE(b2.optimizer.has_value());
  }
  SUBCASE("corruption is rejected") {
    const std::vector<char> bytes = encode_checkpoint(ck);
    std::vector<char> longer = bytes;
    longer.push_back(1);
    CHECK(error_of([&] { decode_checkpoint(longer, "l"); }).find("trailing") != std::string::npos);
    const std::vector<char> cut(bytes.begin(), bytes.end() - 3);
    CHECK_THROWS_AS(decode_checkpoint(cut, "c"), DataError);
    std::vector<char> magic = bytes;
    magic[3] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(magic, "m"), DataError);
  }
  SUBCASE("parameters must fit the config") {
    Checkpoint wrong = ck;
    wrong.config.d = 10;
    CHECK_THROWS_AS(decode_checkpoint(encode_checkpoint(wrong), "w"), DataError);
  }
}

TEST_CASE("loading samples") {
  TempDir dir("samples");
  FixtureSpec spec;
  spec.train = 3;
  spec.val = 0;
  spec.eval = 0;
  const FixtureSet fx = gen_fixtures(spec, dir.path());
  const auto raw = load_samples(fx.entries, nullptr);
  REQUIRE(raw.size() == 3);
  CHECK(raw[0].left == read_features<float>(fx.entries[0].left));
  CHECK(raw[0].audiogram_left.size() == spec.freqs);
  CHECK_FALSE(raw[0].binaural());
  CHECK(raw[2].label == fx.entries[2].label);
  NormStats bad;
  bad.mean = Tensor<double>(Shape{1, spec.dim + 1}, 0.0);
  bad.std = Tensor<double>(Shape{1, spec.dim + 1}, 1.0);
  CHECK_THROWS_AS(load_samples(fx.entries, &bad), ShapeError);
}

}  // TEST_SUITE
