// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

// Command-line front end. Everything goes through the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sipm/sipm.h"

using nlohmann::json;

namespace {

// Published model sizes in millions, for the param-count comparison.
struct Published {
  const char* variant;
  bool binaural;
  double millions;
};
constexpr Published kPublished[] = {
    {"transformer", false, 4.05},  {"transformer-no-skip", false, 4.05},
    {"transformer-no-mlp", false, 2.86}, {"uni-mamba", false, 3.24},
    {"uni-mamba+skip", false, 3.24},     {"uni-mamba+mlp", false, 4.42},
    {"bi-mamba", false, 4.20},           {"bi-mamba+skip", false, 4.20},
    {"bi-mamba+mlp", false, 5.38},       {"uni-lstm", false, 3.46},
    {"bi-lstm", false, 4.94},            {"transformer", true, 5.23},
    {"uni-mamba", true, 3.53},           {"uni-mamba+mlp", true, 4.72},
    {"bi-mamba", true, 5.01},            {"bi-mamba+mlp", true, 6.27},
};

int fail(sipm_status st) {
  std::cerr << "error: " << sipm_last_error() << '\n';
  return static_cast<int>(st);
}

int usage_error(const std::string& msg) {
  std::cerr << "error: " << msg << '\n';
  return 1;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  sipm_string_free(s);
  return out;
}

bool read_json_file(const std::string& path, json& out, std::string& err) {
  std::ifstream in(path);
  if (!in) {
    err = "cannot open '" + path + "'";
    return false;
  }
  try {
    out = json::parse(in);
  } catch (const json::parse_error& e) {
    err = path + ": " + e.what();
    return false;
  }
  return true;
}

bool write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  return static_cast<bool>(out);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    out.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument(item);
  }
  return out;
}

struct RunFlags {
  std::string config;
  std::string variant;
  bool binaural = false;
  bool mono = false;
  std::size_t pool = 0, d = 0, steps = 0, warmup = 0, batch = 0, validate_every = 0;
  double lr = 0.0;
  long long seed = -1;
  bool global_stats = false;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "Run config JSON ({\"model\":{...},\"train\":{...}})");
    app->add_option("--variant", variant, "Temporal block variant");
    app->add_flag("--binaural", binaural, "Binaural model");
    app->add_flag("--mono", mono, "Monaural model");
    app->add_option("--pool", pool, "Temporal pooling size p");
    app->add_option("--d", d, "Model width");
    app->add_option("--steps", steps, "Total training steps");
    app->add_option("--warmup", warmup, "Warmup steps");
    app->add_option("--batch", batch, "Batch size");
    app->add_option("--lr", lr, "Peak learning rate");
    app->add_option("--validate-every", validate_every, "Validation cadence in steps");
    app->add_option("--seed", seed, "Seed for init, shuffling and dropout");
    app->add_flag("--global-stats", global_stats, "One normalization row shared by all layers");
  }

  // Flags override the config file.
  bool build(json& run, std::string& err) const {
    run = json::object();
    if (!config.empty() && !read_json_file(config, run, err)) return false;
    if (!run.is_object()) {
      err = "run config must be a JSON object";
      return false;
    }
    json& m = run["model"];
    json& t = run["train"];
    if (m.is_null()) m = json::object();
    if (t.is_null()) t = json::object();
    if (!variant.empty()) m["variant"] = variant;
    if (binaural && mono) {
      err = "--binaural and --mono are exclusive";
      return false;
    }
    if (binaural) m["binaural"] = true;
    if (mono) m["binaural"] = false;
    if (pool) m["pool"] = pool;
    if (d) m["d"] = d;
    if (seed >= 0) {
      m["seed"] = seed;
      t["seed"] = seed;
    }
    if (steps) t["total_steps"] = steps;
    if (warmup) t["warmup_steps"] = warmup;
    if (batch) t["batch_size"] = batch;
    if (lr > 0.0) t["lr"] = lr;
    if (validate_every) t["validate_every"] = validate_every;
    if (global_stats) run["per_layer_stats"] = false;
    return true;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sipm: speech intelligibility prediction with selective state-space blocks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sipm_version()));

  // gen-fixtures
  auto* gen = app.add_subcommand("gen-fixtures", "Write a deterministic synthetic dataset");
  std::string gen_out, gen_spec;
  json gen_over = json::object();
  long long gen_seed = -1;
  std::size_t gen_train = 0, gen_val = 0, gen_eval = 0, gen_layers = 0, gen_frames = 0,
              gen_dim = 0, gen_freqs = 0;
  bool gen_binaural = false, gen_empty = false;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--spec", gen_spec, "Fixture spec JSON file");
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--train", gen_train, "Training samples");
  gen->add_option("--val", gen_val, "Validation samples");
  gen->add_option("--eval", gen_eval, "Evaluation samples");
  gen->add_option("--layers", gen_layers, "Encoder layers L");
  gen->add_option("--frames", gen_frames, "Frames T");
  gen->add_option("--dim", gen_dim, "Feature dim D_in");
  gen->add_option("--freqs", gen_freqs, "Audiogram frequencies F");
  gen->add_flag("--binaural", gen_binaural, "Two channels per sample");
  gen->add_flag("--empty", gen_empty, "Zero samples in every split");

  // stats
  auto* stats = app.add_subcommand("stats", "Normalization statistics of a manifest split");
  std::string st_manifest, st_split = "train", st_out;
  bool st_global = false;
  stats->add_option("--manifest", st_manifest, "Manifest file")->required();
  stats->add_option("--split", st_split, "Split to use (\"\" for all)");
  stats->add_option("--out", st_out, "Output JSON")->required();
  stats->add_flag("--global", st_global, "One row shared by all layers");

  // train
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  std::string tr_manifest, tr_out, tr_summary;
  std::size_t tr_log_every = 0;
  RunFlags tr_flags;
  train->add_option("--manifest", tr_manifest, "Manifest file")->required();
  train->add_option("--out", tr_out, "Checkpoint path")->required();
  train->add_option("--summary", tr_summary, "Write the training summary JSON here");
  train->add_option("--log-every", tr_log_every, "Print the loss every N steps to stderr");
  tr_flags.add_to(train);

  // predict
  auto* predict = app.add_subcommand("predict", "Predict intelligibility");
  std::string pr_ckpt, pr_left, pr_right, pr_aud_l, pr_aud_r, pr_manifest, pr_split = "eval",
                                                                            pr_out;
  predict->add_option("--checkpoint", pr_ckpt, "Checkpoint")->required();
  predict->add_option("--features", pr_left, "Feature file (left channel)");
  predict->add_option("--right", pr_right, "Right-channel feature file");
  predict->add_option("--audiogram", pr_aud_l, "Comma-separated thresholds, dB HL");
  predict->add_option("--audiogram-right", pr_aud_r, "Right-ear thresholds");
  predict->add_option("--manifest", pr_manifest, "Predict every entry of a manifest split");
  predict->add_option("--split", pr_split, "Split for --manifest");
  predict->add_option("--out", pr_out, "CSV output for --manifest (default stdout)");

  // eval
  auto* ev = app.add_subcommand("eval", "RMSE and NCC of a checkpoint on a split");
  std::string ev_ckpt, ev_manifest, ev_split = "eval", ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint")->required();
  ev->add_option("--manifest", ev_manifest, "Manifest file")->required();
  ev->add_option("--split", ev_split, "Split");
  ev->add_option("--out", ev_out, "Report JSON path (default stdout)");

  // sweep-pooling
  auto* sweep = app.add_subcommand("sweep-pooling", "Train and evaluate per pooling size");
  std::string sw_manifest, sw_variants, sw_pools = "20,10,5", sw_table, sw_runs, sw_json;
  RunFlags sw_flags;
  sweep->add_option("--manifest", sw_manifest, "Manifest file")->required();
  sweep->add_option("--variants", sw_variants, "Comma-separated variants");
  sweep->add_option("--pools", sw_pools, "Comma-separated pooling sizes");
  sweep->add_option("--table", sw_table, "Table CSV path (default stdout)");
  sweep->add_option("--runs", sw_runs, "Per-run CSV path");
  sweep->add_option("--json", sw_json, "Full report JSON path");
  sw_flags.add_to(sweep);

  // bench
  auto* bench = app.add_subcommand("bench", "Forward-time scaling of attention and Mamba");
  std::string bn_kinds = "attention,mamba", bn_lengths = "256,512,1024,2048,4096,8192", bn_csv,
              bn_json;
  std::size_t bn_d = 384, bn_reps = 3;
  bench->add_option("--kinds", bn_kinds, "Comma-separated kinds (attention, mamba)");
  bench->add_option("--lengths", bn_lengths, "Comma-separated sequence lengths");
  bench->add_option("--d", bn_d, "Model width");
  bench->add_option("--reps", bn_reps, "Repetitions per length");
  bench->add_option("--csv", bn_csv, "Timing CSV path");
  bench->add_option("--json", bn_json, "Report JSON path (default stdout)");

  // param-count
  auto* pc = app.add_subcommand("param-count", "Trainable parameter counts");
  std::string pc_variant;
  bool pc_mono = false, pc_binaural = false, pc_all = false;
  pc->add_option("--variant", pc_variant, "Variant");
  pc->add_flag("--mono", pc_mono, "Monaural model");
  pc->add_flag("--binaural", pc_binaural, "Binaural model");
  pc->add_flag("--all", pc_all, "Every published configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      json spec = json::object();
      std::string err;
      if (!gen_spec.empty() && !read_json_file(gen_spec, spec, err)) return usage_error(err);
      if (gen_seed >= 0) spec["seed"] = gen_seed;
      if (gen_train) spec["train"] = gen_train;
      if (gen_val) spec["val"] = gen_val;
      if (gen_eval) spec["eval"] = gen_eval;
      if (gen_layers) spec["layers"] = gen_layers;
      if (gen_frames) spec["frames"] = gen_frames;
      if (gen_dim) spec["dim"] = gen_dim;
      if (gen_freqs) spec["freqs"] = gen_freqs;
      if (gen_binaural) spec["binaural"] = true;
      if (gen_empty) spec["train"] = spec["val"] = spec["eval"] = 0;
      char* summary = nullptr;
      const sipm_status st = sipm_gen_fixtures(spec.dump().c_str(), gen_out.c_str(), &summary);
      if (st != SIPM_OK) return fail(st);
      std::cout << take(summary) << '\n';
      return 0;
    }

    if (*stats) {
      const sipm_status st =
          sipm_compute_stats(st_manifest.c_str(), st_split.c_str(), st_global ? 0 : 1, st_out.c_str());
      if (st != SIPM_OK) return fail(st);
      return 0;
    }

    if (*train) {
      json run;
      std::string err;
      if (!tr_flags.build(run, err)) return usage_error(err);
      struct Ctx {
        std::size_t every;
      } ctx{tr_log_every};
      auto cb = [](uint64_t step, double loss, double lr, void* user) {
        const auto* c = static_cast<const Ctx*>(user);
        if (c->every && step % c->every == 0) {
          std::fprintf(stderr, "step %llu loss %.6f lr %.3g\n",
                       static_cast<unsigned long long>(step), loss, lr);
        }
      };
      char* summary = nullptr;
      const sipm_status st = sipm_train(tr_manifest.c_str(), run.dump().c_str(), tr_out.c_str(),
                                        cb, &ctx, &summary);
      if (st != SIPM_OK) return fail(st);
      const std::string text = take(summary);
      if (!tr_summary.empty() && !write_text(tr_summary, text + "\n")) {
        return usage_error("cannot write '" + tr_summary + "'");
      }
      std::cout << text << '\n';
      return 0;
    }

    if (*predict) {
      if (!pr_manifest.empty()) {
        char* report = nullptr;
        const sipm_status st =
            sipm_evaluate(pr_ckpt.c_str(), pr_manifest.c_str(), pr_split.c_str(), &report);
        if (st != SIPM_OK) return fail(st);
        const json r = json::parse(take(report));
        std::ostringstream csv;
        csv << "id,pred\n";
        csv.precision(9);
        for (const auto& s : r.at("samples")) {
          csv << s.at("id").get<std::string>() << ',' << s.at("pred").get<double>() << '\n';
        }
        if (pr_out.empty()) {
          std::cout << csv.str();
        } else if (!write_text(pr_out, csv.str())) {
          return usage_error("cannot write '" + pr_out + "'");
        }
        return 0;
      }
      if (pr_left.empty() || pr_aud_l.empty()) {
        return usage_error("predict needs --manifest, or --features with --audiogram");
      }
      if (pr_right.empty() != pr_aud_r.empty()) {
        return usage_error("--right and --audiogram-right go together");
      }
      std::vector<double> al, ar;
      try {
        al = parse_list(pr_aud_l);
        if (!pr_aud_r.empty()) ar = parse_list(pr_aud_r);
      } catch (const std::exception&) {
        return usage_error("audiograms must be comma-separated numbers");
      }
      if (!ar.empty() && ar.size() != al.size()) {
        return usage_error("left and right audiograms differ in length");
      }
      sipm_model* model = nullptr;
      sipm_status st = sipm_model_load(pr_ckpt.c_str(), &model);
      if (st != SIPM_OK) return fail(st);
      double out = 0.0;
      st = sipm_predict_files(model, pr_left.c_str(), pr_right.empty() ? nullptr : pr_right.c_str(),
                              al.data(), ar.empty() ? nullptr : ar.data(), al.size(), &out);
      sipm_model_free(model);
      if (st != SIPM_OK) return fail(st);
      std::printf("%.6f\n", out);
      return 0;
    }

    if (*ev) {
      char* report = nullptr;
      const sipm_status st =
          sipm_evaluate(ev_ckpt.c_str(), ev_manifest.c_str(), ev_split.c_str(), &report);
      if (st != SIPM_OK) return fail(st);
      const std::string text = take(report);
      if (ev_out.empty()) {
        std::cout << text << '\n';
      } else if (!write_text(ev_out, text + "\n")) {
        return usage_error("cannot write '" + ev_out + "'");
      }
      return 0;
    }

    if (*sweep) {
      json run;
      std::string err;
      if (!sw_flags.build(run, err)) return usage_error(err);
      if (!sw_variants.empty()) {
        json vs = json::array();
        std::stringstream ss(sw_variants);
        std::string v;
        while (std::getline(ss, v, ',')) vs.push_back(v);
        run["variants"] = vs;
      }
      try {
        json ps = json::array();
        for (double p : parse_list(sw_pools)) {
          if (p < 1 || p != static_cast<double>(static_cast<std::size_t>(p))) {
            return usage_error("pooling sizes must be integers >= 1");
          }
          ps.push_back(static_cast<std::size_t>(p));
        }
        run["pools"] = ps;
      } catch (const std::exception&) {
        return usage_error("--pools must be comma-separated integers");
      }
      char* report = nullptr;
      const sipm_status st = sipm_pooling_sweep(sw_manifest.c_str(), run.dump().c_str(), &report);
      if (st != SIPM_OK) return fail(st);
      const json r = json::parse(take(report));
      const std::string table = r.at("table_csv").get<std::string>();
      if (sw_table.empty()) {
        std::cout << table;
      } else if (!write_text(sw_table, table)) {
        return usage_error("cannot write '" + sw_table + "'");
      }
      if (!sw_runs.empty() && !write_text(sw_runs, r.at("runs_csv").get<std::string>())) {
        return usage_error("cannot write '" + sw_runs + "'");
      }
      if (!sw_json.empty() && !write_text(sw_json, r.dump(2) + "\n")) {
        return usage_error("cannot write '" + sw_json + "'");
      }
      return 0;
    }

    if (*bench) {
      json cfg = json::object();
      json kinds = json::array();
      std::stringstream ks(bn_kinds);
      std::string k;
      while (std::getline(ks, k, ',')) kinds.push_back(k);
      cfg["kinds"] = kinds;
      try {
        json ls = json::array();
        for (double l : parse_list(bn_lengths)) ls.push_back(static_cast<std::size_t>(l));
        cfg["lengths"] = ls;
      } catch (const std::exception&) {
        return usage_error("--lengths must be comma-separated integers");
      }
      cfg["d"] = bn_d;
      cfg["repetitions"] = bn_reps;
      char* report = nullptr;
      const sipm_status st = sipm_bench_scaling(cfg.dump().c_str(), &report);
      if (st != SIPM_OK) return fail(st);
      json r = json::parse(take(report));
      if (!bn_csv.empty() && !write_text(bn_csv, r.at("csv").get<std::string>())) {
        return usage_error("cannot write '" + bn_csv + "'");
      }
      r.erase("csv");
      if (bn_json.empty()) {
        std::cout << r.dump(2) << '\n';
      } else if (!write_text(bn_json, r.dump(2) + "\n")) {
        return usage_error("cannot write '" + bn_json + "'");
      }
      return 0;
    }

    if (*pc) {
      if (pc_mono && pc_binaural) return usage_error("--mono and --binaural are exclusive");
      std::printf("variant,mode,params,millions,published_millions,deviation_percent\n");
      auto row = [](const std::string& v, bool bin) -> int {
        std::size_t n = 0;
        const sipm_status st = sipm_param_count_variant(v.c_str(), bin ? 1 : 0, &n);
        if (st != SIPM_OK) return fail(st);
        const double m = static_cast<double>(n) / 1e6;
        std::printf("%s,%s,%zu,%.3f", v.c_str(), bin ? "binaural" : "mono", n, m);
        for (const auto& p : kPublished) {
          if (v == p.variant && bin == p.binaural) {
            std::printf(",%.2f,%+.2f\n", p.millions, 100.0 * (m - p.millions) / p.millions);
            return 0;
          }
        }
        std::printf(",,\n");
        return 0;
      };
      if (pc_all || pc_variant.empty()) {
        for (const auto& p : kPublished) {
          if ((pc_mono && p.binaural) || (pc_binaural && !p.binaural)) continue;
          if (int rc = row(p.variant, p.binaural)) return rc;
        }
        return 0;
      }
      return row(pc_variant, pc_binaural);
    }
  } catch (const json::exception& e) {
    std::cerr << "error: malformed library output: " << e.what() << '\n';
    return 4;
  }
  return 1;
}
