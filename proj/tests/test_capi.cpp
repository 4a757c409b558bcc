// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "sipm/sipm.h"
#include "support/temp_dir.hpp"

using nlohmann::json;
using sipm::testing::TempDir;

namespace {

// Takes ownership of a returned string.
std::string take(char* s) {
  std::string out = s ? s : "";
  sipm_string_free(s);
  return out;
}

const char* kRun =
    R"({"model": {"variant": "uni-mamba", "d": 8, "pool": 4, "mamba": {"state": 4}},
        "train": {"lr": 0.005, "warmup_steps": 2, "total_steps": 6, "batch_size": 4, "validate_every": 3}})";

std::string small_fixtures(const TempDir& dir, bool binaural = false) {
  const json spec = {{"train", 8}, {"val", 4}, {"eval", 4}, {"frames", 20}, {"binaural", binaural}};
  char* summary = nullptr;
  REQUIRE(sipm_gen_fixtures(spec.dump().c_str(), dir.path().c_str(), &summary) == SIPM_OK);
  const json s = json::parse(take(summary));
  CHECK(s["samples"] == 16);
  return s["manifest"].get<std::string>();
}

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("errors map to status codes and a message") {
  sipm_model* m = nullptr;
  CHECK(sipm_model_create(R"({"variant": "gru"})", &m) == SIPM_ERR_USAGE);
  CHECK(m == nullptr);
  CHECK(std::string(sipm_last_error()).find("gru") != std::string::npos);
  CHECK(sipm_model_create("{not json", &m) == SIPM_ERR_USAGE);
  CHECK(sipm_model_load("/nonexistent/m.ckpt", &m) == SIPM_ERR_DATA);
  CHECK(sipm_model_create(nullptr, nullptr) == SIPM_ERR_USAGE);
  CHECK(sipm_model_create(nullptr, &m) == SIPM_OK);
  CHECK(std::string(sipm_last_error()).empty());
  sipm_model_free(m);
  sipm_model_free(nullptr);
  CHECK(std::string(sipm_version()).size() > 0);
}

TEST_CASE("model handles") {
  TempDir dir("capi_model");
  sipm_model* m = nullptr;
  REQUIRE(sipm_model_create(R"({"variant": "bi-mamba", "d": 8, "layers": 2, "d_in": 6, "freqs": 3})", &m) ==
          SIPM_OK);
  size_t n = 0;
  REQUIRE(sipm_model_param_count(m, &n) == SIPM_OK);
  CHECK(n > 0);
  char* cfg = nullptr;
  REQUIRE(sipm_model_config(m, &cfg) == SIPM_OK);
  CHECK(json::parse(take(cfg))["variant"] == "bi-mamba");
  int has_norm = -1;
  CHECK(sipm_model_has_norm(m, &has_norm) == SIPM_OK);
  CHECK(has_norm == 0);

  std::vector<float> feats(2 * 5 * 6, 0.1f), ag = {10, 20, 30};
  double a = 0.0, b = 0.0;
  REQUIRE(sipm_predict_mono(m, feats.data(), 2, 5, 6, ag.data(), 3, &a) == SIPM_OK);
  CHECK(a > 0.0);
  CHECK(a < 100.0);
  CHECK(sipm_predict_mono(m, feats.data(), 2, 5, 7, ag.data(), 3, &b) == SIPM_ERR_DATA);
  CHECK(sipm_predict_binaural(m, feats.data(), feats.data(), 2, 5, 6, ag.data(), ag.data(), 3, &b) ==
        SIPM_ERR_USAGE);
  std::vector<float> bad = {10, 20, 500};
  CHECK(sipm_predict_mono(m, feats.data(), 2, 5, 6, bad.data(), 3, &b) == SIPM_ERR_DATA);
  std::vector<float> nan_feats = feats;
  nan_feats[3] = NAN;
  CHECK(sipm_predict_mono(m, nan_feats.data(), 2, 5, 6, ag.data(), 3, &b) != SIPM_OK);

  const std::string path = (dir / "m.ckpt").string();
  REQUIRE(sipm_model_save(m, path.c_str()) == SIPM_OK);
  sipm_model* back = nullptr;
  REQUIRE(sipm_model_load(path.c_str(), &back) == SIPM_OK);
  REQUIRE(sipm_predict_mono(back, feats.data(), 2, 5, 6, ag.data(), 3, &b) == SIPM_OK);
  CHECK(a == b);
  sipm_model_free(back);
  sipm_model_free(m);
}

TEST_CASE("published variant counts") {
  size_t n = 0;
  REQUIRE(sipm_param_count_variant("uni-mamba", 0, &n) == SIPM_OK);
  CHECK(n == doctest::Approx(3.24e6).epsilon(0.02));
  REQUIRE(sipm_param_count_variant("transformer", 1, &n) == SIPM_OK);
  CHECK(n > 0);
  CHECK(sipm_param_count_variant("nope", 0, &n) == SIPM_ERR_USAGE);
}

TEST_CASE("train, evaluate and predict through the library") {
  TempDir dir("capi_run");
  const std::string manifest = small_fixtures(dir);
  const std::string ckpt = (dir / "run.ckpt").string();
  std::uint64_t calls = 0;
  auto progress = [](uint64_t, double, double, void* user) { ++*static_cast<std::uint64_t*>(user); };
  char* summary = nullptr;
  REQUIRE(sipm_train(manifest.c_str(), kRun, ckpt.c_str(), progress, &calls, &summary) == SIPM_OK);
  const json s = json::parse(take(summary));
  CHECK(s["steps"] == 6);
  CHECK(calls == 6);
  CHECK(s["pooled_frames"] == 5);

  char* report = nullptr;
  REQUIRE(sipm_evaluate(ckpt.c_str(), manifest.c_str(), "eval", &report) == SIPM_OK);
  const json r = json::parse(take(report));
  CHECK(r["n"] == 4);
  CHECK(r["samples"].size() == 4);
  CHECK(sipm_evaluate(ckpt.c_str(), manifest.c_str(), "nothing", &report) == SIPM_ERR_DATA);

  sipm_model* m = nullptr;
  REQUIRE(sipm_model_load(ckpt.c_str(), &m) == SIPM_OK);
  int has_norm = 0;
  sipm_model_has_norm(m, &has_norm);
  CHECK(has_norm == 1);
  const json first = r["samples"][0];
  const std::string feat = (dir / "features" / (first["id"].get<std::string>() + ".L.sipf")).string();
  std::ifstream mf(manifest);
  std::string line;
  std::vector<double> ag;
  while (std::getline(mf, line)) {
    const json e = json::parse(line);
    if (e.value("id", "") == first["id"]) ag = e["audiogram_left"].get<std::vector<double>>();
  }
  REQUIRE(ag.size() == 8);
  double p = 0.0;
  REQUIRE(sipm_predict_files(m, feat.c_str(), nullptr, ag.data(), nullptr, ag.size(), &p) == SIPM_OK);
  CHECK(p == doctest::Approx(first["pred"].get<double>()).epsilon(1e-12));
  sipm_model_free(m);

  const std::string stats = (dir / "stats.json").string();
  CHECK(sipm_compute_stats(manifest.c_str(), "train", 1, stats.c_str()) == SIPM_OK);
  CHECK(std::filesystem::exists(stats));
  CHECK(sipm_train(manifest.c_str(), R"({"epochs": 2})", ckpt.c_str(), nullptr, nullptr, nullptr) ==
        SIPM_ERR_USAGE);
}

TEST_CASE("pooling sweep and bench return reports") {
  TempDir dir("capi_sweep");
  const std::string manifest = small_fixtures(dir);
  json run = json::parse(kRun);
  run["variants"] = {"uni-mamba", "uni-lstm"};
  run["pools"] = {10, 5};
  char* report = nullptr;
  REQUIRE(sipm_pooling_sweep(manifest.c_str(), run.dump().c_str(), &report) == SIPM_OK);
  const json r = json::parse(take(report));
  CHECK(r["runs"].size() == 4);
  CHECK(r["table_csv"].get<std::string>().rfind("variant,binaural,params,rmse_p10,rmse_p5", 0) == 0);

  REQUIRE(sipm_bench_scaling(R"({"lengths": [8, 16, 32, 64], "d": 8, "repetitions": 1, "min_seconds": 0})",
                             &report) == SIPM_OK);
  const json b = json::parse(take(report));
  CHECK(b.contains("series"));
  CHECK(sipm_bench_scaling(R"({"lengths": [8]})", &report) == SIPM_ERR_USAGE);
}

}  // TEST_SUITE
