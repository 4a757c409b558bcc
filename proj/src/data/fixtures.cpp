// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "data/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "data/binary_io.hpp"
#include "data/feature_io.hpp"
#include "numerics/tensor.hpp"

namespace sipm::data {

using nlohmann::json;
namespace fs = std::filesystem;

void FixtureSpec::validate() const {
  if (layers == 0 || frames == 0 || dim == 0 || freqs == 0) {
    throw UsageError("fixture dims (layers, frames, dim, freqs) must be positive");
  }
  if (!(noise >= 0.0) || !(offset >= 0.0) || !std::isfinite(signal)) {
    throw UsageError("fixture noise and offset must be non-negative");
  }
}

json fixture_spec_to_json(const FixtureSpec& s) {
  return json{{"seed", s.seed},     {"train", s.train},   {"val", s.val},
              {"eval", s.eval},     {"layers", s.layers}, {"frames", s.frames},
              {"dim", s.dim},       {"freqs", s.freqs},   {"binaural", s.binaural},
              {"signal", s.signal}, {"noise", s.noise},   {"offset", s.offset}};
}

FixtureSpec fixture_spec_from_json(const json& j) {
  if (!j.is_object()) throw UsageError("fixture spec must be a JSON object");
  FixtureSpec s;
  const json defaults = fixture_spec_to_json(s);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw UsageError("unknown fixture spec key '" + key + "'");
  }
  try {
    s.seed = j.value("seed", s.seed);
    s.train = j.value("train", s.train);
    s.val = j.value("val", s.val);
    s.eval = j.value("eval", s.eval);
    s.layers = j.value("layers", s.layers);
    s.frames = j.value("frames", s.frames);
    s.dim = j.value("dim", s.dim);
    s.freqs = j.value("freqs", s.freqs);
    s.binaural = j.value("binaural", s.binaural);
    s.signal = j.value("signal", s.signal);
    s.noise = j.value("noise", s.noise);
    s.offset = j.value("offset", s.offset);
  } catch (const json::exception& e) {
    throw UsageError(std::string("fixture spec: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

struct Generator {
  const FixtureSpec& spec;
  std::mt19937_64 rng;
  std::vector<std::vector<double>> directions;  // per layer, unit length
  std::vector<double> layer_gain;

  explicit Generator(const FixtureSpec& s) : spec(s), rng(s.seed) {
    std::normal_distribution<double> n01(0.0, 1.0);
    for (std::size_t l = 0; l < s.layers; ++l) {
      std::vector<double> u(s.dim);
      double norm = 0.0;
      for (auto& v : u) {
        v = n01(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (auto& v : u) v /= norm;
      directions.push_back(std::move(u));
      layer_gain.push_back(0.5 + static_cast<double>(l + 1) / static_cast<double>(s.layers));
    }
  }

  Tensor<float> features(double latent) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Tensor<float> x(Shape{spec.layers, spec.frames, spec.dim});
    std::vector<double> offset(spec.dim);
    for (std::size_t l = 0; l < spec.layers; ++l) {
      for (auto& o : offset) o = spec.offset * n01(rng);
      const double amp = spec.signal * layer_gain[l] * latent;
      for (std::size_t t = 0; t < spec.frames; ++t) {
        float* row = x.ptr() + (l * spec.frames + t) * spec.dim;
        for (std::size_t j = 0; j < spec.dim; ++j) {
          row[j] = static_cast<float>(amp * directions[l][j] + offset[j] + spec.noise * n01(rng));
        }
      }
    }
    return x;
  }

  // Sloping hearing loss: thresholds rise with frequency, clamped to [0, 80].
  std::vector<double> audiogram(double base) {
    std::uniform_real_distribution<double> slope_dist(0.0, 25.0);
    std::normal_distribution<double> jitter(0.0, 3.0);
    const double slope = slope_dist(rng);
    std::vector<double> thr(spec.freqs);
    for (std::size_t k = 0; k < spec.freqs; ++k) {
      const double frac = spec.freqs > 1 ? static_cast<double>(k) / (spec.freqs - 1) : 0.0;
      // Rounded to 0.1 dB so the manifest text is short and exact.
      thr[k] = std::round(std::clamp(base + slope * frac + jitter(rng), 0.0, 80.0) * 10.0) / 10.0;
    }
    return thr;
  }
};

double hearing_term(const std::vector<double>& thr) {
  double m = 0.0;
  for (double v : thr) m += v;
  return m / static_cast<double>(thr.size()) / 40.0 - 1.0;
}

}  // namespace

FixtureSet gen_fixtures(const FixtureSpec& spec, const fs::path& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create '" + out_dir.string() + "': " + ec.message());

  FixtureSet set;
  set.manifest = out_dir / "manifest.jsonl";
  Generator gen(spec);
  std::uniform_real_distribution<double> latent_dist(-2.0, 2.0);
  std::uniform_real_distribution<double> base_dist(0.0, 60.0);
  std::normal_distribution<double> ear_diff(0.0, 8.0);

  if (spec.total() > 0) {
    fs::create_directories(out_dir / "features", ec);
    if (ec) throw DataError("cannot create feature directory: " + ec.message());
  }
  const std::pair<const char*, std::size_t> splits[] = {
      {"train", spec.train}, {"val", spec.val}, {"eval", spec.eval}};
  for (const auto& [split, count] : splits) {
    for (std::size_t i = 0; i < count; ++i) {
      char id[64];
      std::snprintf(id, sizeof(id), "%s-%04zu", split, i);
      ManifestEntry e;
      e.id = id;
      e.split = split;
      const double s = latent_dist(gen.rng);
      const double base = base_dist(gen.rng);
      e.audiogram_left = gen.audiogram(base);
      double h = hearing_term(e.audiogram_left);
      e.left = out_dir / "features" / (e.id + ".L.sipf");
      write_features(e.left, gen.features(s));
      if (spec.binaural) {
        e.audiogram_right = gen.audiogram(std::clamp(base + ear_diff(gen.rng), 0.0, 70.0));
        h = 0.5 * (h + hearing_term(*e.audiogram_right));
        e.right = out_dir / "features" / (e.id + ".R.sipf");
        write_features(*e.right, gen.features(s));
      }
      const double logit = 1.5 * s - h;
      e.label = 100.0 / (1.0 + std::exp(-logit));
      set.planted.push_back({e.id, s, h, logit, e.label});
      set.entries.push_back(std::move(e));
    }
  }
  write_manifest(set.manifest, set.entries);
  if (!set.planted.empty()) {
    json planted = json::array();
    for (const auto& p : set.planted) {
      planted.push_back({{"id", p.id}, {"latent", p.latent}, {"hearing", p.hearing},
                         {"logit", p.logit}, {"label", p.label}});
    }
    write_text(out_dir / "planted.json",
               json{{"spec", fixture_spec_to_json(spec)}, {"samples", planted}}.dump(1) + "\n");
  }
  return set;
}

}  // namespace sipm::data
