// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "eval/metrics.hpp"

#include <cmath>

#include "common/error.hpp"

namespace sipm::eval {

namespace {

void check_pair(const std::vector<double>& p, const std::vector<double>& t, std::size_t min_n,
                const char* what) {
  if (p.size() != t.size()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(p.size()) + " predictions vs " +
                     std::to_string(t.size()) + " targets");
  }
  if (p.size() < min_n) {
    throw DataError(std::string(what) + ": needs at least " + std::to_string(min_n) + " values");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i]) || !std::isfinite(t[i])) {
      throw NumericError(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double rmse(const std::vector<double>& preds, const std::vector<double>& targets) {
  check_pair(preds, targets, 1, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double e = preds[i] - targets[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(preds.size()));
}

double ncc(const std::vector<double>& preds, const std::vector<double>& targets) {
  check_pair(preds, targets, 2, "ncc");
  const double mp = mean(preds), mt = mean(targets);
  double spt = 0.0, spp = 0.0, stt = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double a = preds[i] - mp, b = targets[i] - mt;
    spt += a * b;
    spp += a * a;
    stt += b * b;
  }
  if (spp == 0.0) throw DataError("ncc: predictions are constant, correlation undefined");
  if (stt == 0.0) throw DataError("ncc: targets are constant, correlation undefined");
  const double r = spt / std::sqrt(spp * stt);
  return std::fmax(-1.0, std::fmin(1.0, r));
}

std::optional<double> try_ncc(const std::vector<double>& preds,
                              const std::vector<double>& targets) {
  try {
    return ncc(preds, targets);
  } catch (const DataError&) {
    return std::nullopt;
  }
}

std::vector<double> MetricReport::residuals() const {
  std::vector<double> r(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) r[i] = preds[i] - targets[i];
  return r;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json samples = nlohmann::json::array();
  const auto res = residuals();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    samples.push_back({{"id", ids[i]}, {"pred", preds[i]}, {"target", targets[i]},
                       {"residual", res[i]}});
  }
  nlohmann::json j = {{"split", split},  {"n", n},          {"rmse", rmse},
                      {"ncc_definition", "centered"},      {"samples", samples}};
  j["ncc"] = ncc ? nlohmann::json(*ncc) : nlohmann::json(nullptr);
  if (!ncc) j["ncc_note"] = "undefined: predictions or targets are constant";
  return j;
}

MetricReport make_report(std::string split, std::vector<std::string> ids,
                         std::vector<double> preds, std::vector<double> targets) {
  MetricReport r;
  r.split = std::move(split);
  r.n = preds.size();
  r.rmse = rmse(preds, targets);
  r.ncc = preds.size() >= 2 ? try_ncc(preds, targets) : std::nullopt;
  r.ids = std::move(ids);
  r.preds = std::move(preds);
  r.targets = std::move(targets);
  return r;
}

}  // namespace sipm::eval
