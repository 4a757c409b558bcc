// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "data/dataset.hpp"

#include "data/feature_io.hpp"
#include "model/sip_model.hpp"

namespace sipm::data {

namespace {

Tensor<float> thresholds(const std::vector<double>& v) {
  Tensor<float> t(Shape{v.size()});
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<float>(v[i]);
  return t;
}

Tensor<float> load(const std::filesystem::path& p, const NormStats* norm) {
  Tensor<float> f = read_features<float>(p);
  return norm ? model::normalize_features(f, norm->mean, norm->std) : f;
}

}  // namespace

std::vector<Sample> load_samples(const std::vector<ManifestEntry>& entries,
                                 const NormStats* norm) {
  std::vector<Sample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    Sample s;
    s.id = e.id;
    s.left = load(e.left, norm);
    s.audiogram_left = thresholds(e.audiogram_left);
    if (e.right) {
      s.right = load(*e.right, norm);
      s.audiogram_right = thresholds(*e.audiogram_right);
    }
    s.label = e.label;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sipm::data
