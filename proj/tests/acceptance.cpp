// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Pass a list of criterion numbers to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "data/fixtures.hpp"
#include "data/manifest.hpp"
#include "eval/bench.hpp"
#include "eval/metrics.hpp"
#include "eval/pipeline.hpp"
#include "json.hpp"
#include "sipm/sipm.h"
#include "support/suites.hpp"
#include "support/temp_dir.hpp"

using namespace sipm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// Worst case of a suite, with the count of failures.
Outcome summarize(const std::vector<testing::CheckResult>& rs) {
  std::size_t bad = 0;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : rs) {
    if (!r.ok()) {
      ++bad;
      std::fprintf(stderr, "  failed: %s error=%g limit=%g\n", r.name.c_str(), r.error, r.limit);
    }
    if (!r.exact && r.limit > 0 && r.error / r.limit >= worst) {
      worst = r.error / r.limit;
      worst_name = r.name;
    }
  }
  std::ostringstream d;
  d << rs.size() << " checks, " << bad << " failed";
  if (!worst_name.empty()) d << ", worst " << worst_name << " at " << fmt("%.3g", worst) << " of limit";
  return {bad == 0 && !rs.empty(), d.str()};
}

Outcome parameter_counts() {
  struct Row {
    model::TemporalVariant v;
    bool binaural;
    double millions;
  };
  using model::TemporalVariant;
  const Row rows[] = {
      {TemporalVariant::kTransformer, false, 4.05},       {TemporalVariant::kTransformerNoSkip, false, 4.05},
      {TemporalVariant::kTransformerNoMlp, false, 2.86},  {TemporalVariant::kUniMamba, false, 3.24},
      {TemporalVariant::kUniMambaSkip, false, 3.24},      {TemporalVariant::kUniMambaMlp, false, 4.42},
      {TemporalVariant::kBiMamba, false, 4.20},           {TemporalVariant::kBiMambaSkip, false, 4.20},
      {TemporalVariant::kBiMambaMlp, false, 5.38},        {TemporalVariant::kUniLstm, false, 3.46},
      {TemporalVariant::kBiLstm, false, 4.94},            {TemporalVariant::kTransformer, true, 5.23},
      {TemporalVariant::kUniMamba, true, 3.53},           {TemporalVariant::kUniMambaMlp, true, 4.72},
      {TemporalVariant::kBiMamba, true, 5.01},            {TemporalVariant::kBiMambaMlp, true, 6.27},
  };
  std::size_t bad = 0;
  double worst = 0.0;
  for (const Row& r : rows) {
    const double m = static_cast<double>(model::count_parameters(r.v, r.binaural)) / 1e6;
    const double dev = (m - r.millions) / r.millions;
    std::fprintf(stderr, "  %-22s %-8s %.4fM vs %.2fM (%+.2f%%)\n",
                 std::string(blocks::variant_name(r.v)).c_str(), r.binaural ? "binaural" : "mono", m,
                 r.millions, 100.0 * dev);
    worst = std::max(worst, std::abs(dev));
    if (std::abs(dev) > 0.02) ++bad;
  }
  return {bad == 0, "16 configurations, " + std::to_string(bad) + " outside 2%, worst " +
                        fmt("%.2f%%", 100.0 * worst)};
}

Outcome scan_equivalence() {
  const auto rs = testing::scan_equivalence_suite(120);
  Outcome o = summarize(rs);
  o.detail = "120 instances per precision over T in {1,2,3,64,65,257}; " + o.detail;
  return o;
}

Outcome gradients() {
  auto rs = testing::primitive_gradient_suite();
  for (auto& r : testing::block_gradient_suite()) rs.push_back(std::move(r));
  for (auto& r : testing::model_gradient_suite()) rs.push_back(std::move(r));
  return summarize(rs);
}

Outcome causality() { return summarize(testing::causality_suite()); }

Outcome learnability(const fs::path& root) {
  data::FixtureSpec spec;  // L=4, T=40, D_in=32; 16 val, 32 eval
  spec.train = 512;
  const auto entries = data::gen_fixtures(spec, root / "learn").entries;
  eval::RunSpec run;
  run.model.variant = model::TemporalVariant::kUniMamba;
  run.model.d = 32;
  run.model.pool = 4;
  run.model.layers = spec.layers;
  run.model.d_in = spec.dim;
  run.model.freqs = spec.freqs;
  run.train.schedule = training::Schedule{2e-3, 100, 3000};
  run.train.batch_size = 16;
  run.train.validate_every = 100;
  const eval::RunResult r = eval::train_and_evaluate(run, entries);

  double mean = 0.0;
  const auto train = data::select_split(entries, "train");
  for (const auto& e : train) mean += e.label;
  mean /= static_cast<double>(train.size());
  const double baseline = eval::rmse(std::vector<double>(r.eval.targets.size(), mean), r.eval.targets);
  const double ncc = r.eval.ncc.value_or(0.0);
  const bool pass = ncc > 0.8 && r.eval.rmse <= 0.7 * baseline;
  std::ostringstream d;
  d << spec.train << " train / " << spec.eval << " eval, 3000 steps, eval NCC " << fmt("%.3f", ncc) << ", RMSE " << fmt("%.2f", r.eval.rmse)
    << " vs constant baseline " << fmt("%.2f", baseline) << " (ratio "
    << fmt("%.3f", r.eval.rmse / baseline) << ")";
  return {pass, d.str()};
}

Outcome scaling() {
  eval::BenchConfig cfg;  // T 256..8192, d 384
  cfg.repetitions = 5;    // single runs on a shared host swing by tens of percent
  const eval::BenchReport r = eval::bench_scaling(cfg, [](const std::string& s) {
    std::fprintf(stderr, "  %s\n", s.c_str());
  });
  double att = NAN, mam = NAN;
  for (const auto& s : r.series) {
    (s.kind == eval::BenchKind::kAttention ? att : mam) = s.exponent;
  }
  const bool pass = att >= 1.6 && att <= 2.4 && mam >= 0.8 && mam <= 1.2 && r.stepper_memory_constant();
  return {pass, "attention exponent " + fmt("%.3f", att) + ", mamba exponent " + fmt("%.3f", mam) +
                    ", stepper memory " + (r.stepper_memory_constant() ? "constant" : "varies")};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = testing::slurp(e.path());
  }
  return out;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  sipm_string_free(s);
  return out;
}

// Fixtures, training, evaluation and per-file prediction, all through the C API.
bool full_run(const fs::path& dir, std::string& err) {
  const char* run =
      R"({"model": {"variant": "bi-mamba", "d": 16, "pool": 4},
          "train": {"lr": 0.002, "warmup_steps": 20, "total_steps": 200, "batch_size": 8,
                    "validate_every": 50, "seed": 3}})";
  char* out = nullptr;
  const std::string ckpt = (dir / "model.ckpt").string();
  if (sipm_gen_fixtures(R"({"train": 32, "val": 8, "eval": 16, "binaural": true})", (dir / "data").c_str(),
                        &out) != SIPM_OK) {
    err = sipm_last_error();
    return false;
  }
  const std::string manifest = json::parse(take(out))["manifest"];
  if (sipm_train(manifest.c_str(), run, ckpt.c_str(), nullptr, nullptr, &out) != SIPM_OK) {
    err = sipm_last_error();
    return false;
  }
  testing::spit(dir / "train_summary.json", take(out));
  if (sipm_evaluate(ckpt.c_str(), manifest.c_str(), "eval", &out) != SIPM_OK) {
    err = sipm_last_error();
    return false;
  }
  testing::spit(dir / "report.json", take(out));
  sipm_model* m = nullptr;
  if (sipm_model_load(ckpt.c_str(), &m) != SIPM_OK) {
    err = sipm_last_error();
    return false;
  }
  std::ostringstream preds;
  preds.precision(17);
  for (const auto& e : data::select_split(data::load_manifest(manifest), "eval")) {
    double p = 0.0;
    if (sipm_predict_files(m, e.left.c_str(), e.right->c_str(), e.audiogram_left.data(),
                           e.audiogram_right->data(), e.audiogram_left.size(), &p) != SIPM_OK) {
      err = sipm_last_error();
      sipm_model_free(m);
      return false;
    }
    preds << e.id << ',' << p << '\n';
  }
  sipm_model_free(m);
  testing::spit(dir / "predictions.csv", preds.str());
  return true;
}

Outcome determinism(const fs::path& root) {
  std::string err;
  fs::create_directories(root / "run_a");
  fs::create_directories(root / "run_b");
  if (!full_run(root / "run_a", err) || !full_run(root / "run_b", err)) return {false, "run failed: " + err};
  auto a = tree(root / "run_a"), b = tree(root / "run_b");
  // The summary names the checkpoint path, which differs by directory.
  const auto strip = [](std::string& s) {
    json j = json::parse(s);
    j.erase("checkpoint");
    s = j.dump();
  };
  strip(a["train_summary.json"]);
  strip(b["train_summary.json"]);
  std::size_t differing = 0;
  for (const auto& [k, v] : a) {
    if (!b.count(k) || b[k] != v) {
      ++differing;
      std::fprintf(stderr, "  differs: %s\n", k.c_str());
    }
  }
  const bool pass = a.size() == b.size() && differing == 0;
  return {pass, std::to_string(a.size()) + " files compared byte for byte, " + std::to_string(differing) +
                    " differ (fixtures, checkpoint, report, predictions)"};
}

Outcome pooling(const fs::path& root) {
  data::FixtureSpec spec;
  spec.train = 32;
  spec.val = 8;
  spec.eval = 16;
  spec.binaural = true;
  const auto entries = data::gen_fixtures(spec, root / "sweep").entries;
  eval::RunSpec base;
  base.model.binaural = true;
  base.model.d = 16;
  base.model.layers = spec.layers;
  base.model.d_in = spec.dim;
  base.model.freqs = spec.freqs;
  base.train.schedule = training::Schedule{2e-3, 10, 100};
  base.train.batch_size = 8;
  base.train.validate_every = 50;
  using model::TemporalVariant;
  const std::vector<TemporalVariant> variants = {TemporalVariant::kTransformer, TemporalVariant::kUniMamba,
                                                 TemporalVariant::kUniMambaMlp, TemporalVariant::kBiMamba,
                                                 TemporalVariant::kBiMambaMlp};
  const eval::SweepReport s = eval::pooling_sweep(base, variants, eval::kDefaultPools, entries);
  std::fprintf(stderr, "%s", s.table_csv().c_str());

  bool ok = s.rows.size() == variants.size() * 3;
  for (std::size_t i = 0; ok && i < s.rows.size(); i += 3) {
    ok = s.rows[i].params == s.rows[i + 1].params && s.rows[i].params == s.rows[i + 2].params &&
         std::isfinite(s.rows[i].rmse) && std::isfinite(s.rows[i + 1].rmse) && std::isfinite(s.rows[i + 2].rmse);
  }
  std::istringstream table(s.table_csv());
  std::string header;
  std::getline(table, header);
  ok = ok && header == "variant,binaural,params,rmse_p20,rmse_p10,rmse_p5";
  return {ok, std::to_string(variants.size()) + " binaural variants x p in {20,10,5}, table header '" +
                  header + "'"};
}

Outcome metrics() {
  struct Case {
    const char* name;
    bool ok;
  };
  const std::vector<double> t = {12, 40, 55, 71, 90};
  std::vector<double> affine;
  for (double x : t) affine.push_back(0.25 * x + 13.0);
  bool constant_rejected = false;
  try {
    eval::ncc({3, 3, 3}, {1, 2, 3});
  } catch (const DataError&) {
    constant_rejected = true;
  }
  const Case cases[] = {
      {"rmse identical", eval::rmse(t, t) == 0.0},
      {"rmse sqrt(12.5)", std::abs(eval::rmse({0, 0}, {5, 0}) - std::sqrt(12.5)) < 1e-12},
      {"rmse constant offset", std::abs(eval::rmse({4, 4, 4}, {1, 1, 1}) - 3.0) < 1e-12},
      {"ncc identical", std::abs(eval::ncc(t, t) - 1.0) < 1e-12},
      {"ncc negated", std::abs(eval::ncc({-1, -2, -3}, {1, 2, 3}) + 1.0) < 1e-12},
      {"ncc affine invariance", std::abs(eval::ncc(affine, t) - 1.0) < 1e-12},
      {"ncc constant rejected", constant_rejected},
  };
  std::size_t bad = 0;
  for (const Case& c : cases) {
    if (!c.ok) {
      ++bad;
      std::fprintf(stderr, "  failed: %s\n", c.name);
    }
  }
  return {bad == 0, std::to_string(std::size(cases)) + " examples, " + std::to_string(bad) + " failed"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  testing::TempDir root("acceptance");

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"parameter counts", parameter_counts},
      {"scan equivalence", scan_equivalence},
      {"gradient checks", gradients},
      {"causality", causality},
      {"learnability", [&] { return learnability(root.path()); }},
      {"scaling benchmark", scaling},
      {"pipeline determinism", [&] { return determinism(root.path()); }},
      {"pooling sweep", [&] { return pooling(root.path()); }},
      {"metric examples", metrics},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(n)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
