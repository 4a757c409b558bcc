// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <vector>

#include "data/manifest.hpp"
#include "data/norm_stats.hpp"
#include "numerics/tensor.hpp"

namespace sipm::data {

// One sample held in memory, features already normalized.
struct Sample {
  std::string id;
  Tensor<float> left;   // L x T x D_in
  Tensor<float> right;  // empty when monaural
  Tensor<float> audiogram_left;
  Tensor<float> audiogram_right;
  double label = 0.0;

  bool binaural() const { return !right.empty(); }
};

// Reads and normalizes every entry. norm may be null (raw features).
std::vector<Sample> load_samples(const std::vector<ManifestEntry>& entries, const NormStats* norm);

}  // namespace sipm::data
