// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "data/manifest.hpp"
#include "json.hpp"

// Synthetic data with a known answer. Each sample has a latent score
// s ~ U(-2, 2) written into every layer along a fixed per-layer direction,
// plus a per-sample offset and per-frame noise. Audiograms follow a sloping
// loss with mean threshold m (dB HL), giving a hearing term h = m / 40 - 1
// (averaged over ears when binaural). The label is 100 sigmoid(1.5 s - h).
namespace sipm::data {

struct FixtureSpec {
  std::uint64_t seed = 7;
  std::size_t train = 64;
  std::size_t val = 16;
  std::size_t eval = 32;
  std::size_t layers = 4;
  std::size_t frames = 40;
  std::size_t dim = 32;
  std::size_t freqs = 8;
  bool binaural = false;
  double signal = 1.0;   // amplitude of the latent direction
  double noise = 1.0;    // per-frame noise std
  double offset = 0.5;   // per-sample constant offset std

  std::size_t total() const { return train + val + eval; }
  void validate() const;
};

nlohmann::json fixture_spec_to_json(const FixtureSpec& s);
FixtureSpec fixture_spec_from_json(const nlohmann::json& j);

struct PlantedSample {
  std::string id;
  double latent;  // s
  double hearing; // h
  double logit;   // 1.5 s - h
  double label;
};

struct FixtureSet {
  std::filesystem::path manifest;
  std::vector<ManifestEntry> entries;
  std::vector<PlantedSample> planted;
};

// Writes manifest.jsonl, features/<id>.<L|R>.sipf and planted.json under
// out_dir. Output bytes depend only on the spec.
FixtureSet gen_fixtures(const FixtureSpec& spec, const std::filesystem::path& out_dir);

}  // namespace sipm::data
