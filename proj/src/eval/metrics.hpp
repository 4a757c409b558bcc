// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace sipm::eval {

// sqrt(mean((p - t)^2)). Rejects empty or mismatched inputs.
double rmse(const std::vector<double>& preds, const std::vector<double>& targets);

// Centered (Pearson) normalized cross-correlation. Needs at least two values
// and rejects a constant vector, for which it is undefined.
double ncc(const std::vector<double>& preds, const std::vector<double>& targets);

// ncc, or nullopt where it is undefined.
std::optional<double> try_ncc(const std::vector<double>& preds,
                              const std::vector<double>& targets);

struct MetricReport {
  std::string split;
  std::size_t n = 0;
  double rmse = 0.0;
  std::optional<double> ncc;  // empty when predictions or labels are constant
  std::vector<std::string> ids;
  std::vector<double> preds;
  std::vector<double> targets;

  std::vector<double> residuals() const;
  nlohmann::json to_json() const;
};

MetricReport make_report(std::string split, std::vector<std::string> ids,
                         std::vector<double> preds, std::vector<double> targets);

}  // namespace sipm::eval
