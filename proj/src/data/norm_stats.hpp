// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "data/manifest.hpp"
#include "json.hpp"
#include "numerics/tensor.hpp"

namespace sipm::data {

// Population mean and std per (layer, dim), or per dim shared by all layers.
// std is floored at 1e-8.
struct NormStats {
  Tensor<double> mean;  // L x D or 1 x D
  Tensor<double> std;
  std::string split;
  bool per_layer = true;
  std::size_t frames = 0;  // frames accumulated per row
};

class NormAccumulator {
 public:
  NormAccumulator(std::size_t layers, std::size_t dim, bool per_layer);
  // feats: L x T x D.
  void add(const Tensor<float>& feats);
  NormStats finish(const std::string& split) const;

 private:
  std::size_t layers_, dim_;
  bool per_layer_;
  std::vector<double> mean_, m2_;
  std::vector<std::size_t> count_;
};

// Streams over the left (and right, when present) feature files.
NormStats compute_norm_stats(const std::vector<ManifestEntry>& entries, bool per_layer = true,
                             const std::string& split = "train");

nlohmann::json stats_to_json(const NormStats& s);
NormStats stats_from_json(const nlohmann::json& j);
void save_norm_stats(const std::filesystem::path& path, const NormStats& s);
NormStats load_norm_stats(const std::filesystem::path& path);

}  // namespace sipm::data
