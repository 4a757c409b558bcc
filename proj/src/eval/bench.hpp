// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace sipm::eval {

enum class BenchKind { kAttention, kMamba };

std::string bench_kind_name(BenchKind k);
BenchKind parse_bench_kind(const std::string& name);

struct BenchConfig {
  std::vector<BenchKind> kinds = {BenchKind::kAttention, BenchKind::kMamba};
  std::vector<std::size_t> lengths = {256, 512, 1024, 2048, 4096, 8192};
  std::size_t d = 384;
  std::size_t repetitions = 3;
  std::uint64_t seed = 0;
  // Points whose median is below this many seconds are flagged and left out
  // of the fit.
  double min_seconds = 1e-4;

  void validate() const;
};

struct BenchPoint {
  std::size_t length = 0;
  double median_seconds = 0.0;
  std::vector<double> seconds;  // every repetition
  std::size_t peak_bytes = 0;   // transient tensor memory during one forward
  bool flagged = false;         // too fast for the timer, excluded from the fit
};

struct BenchSeries {
  BenchKind kind = BenchKind::kAttention;
  std::vector<BenchPoint> points;
  double exponent = 0.0;  // least-squares slope of log(time) on log(T)
  std::size_t fitted_points = 0;
};

// Frame-by-frame Mamba inference: recurrent state and tensor memory held
// after T steps.
struct StepperPoint {
  std::size_t length = 0;
  std::size_t state_bytes = 0;
  std::size_t live_bytes = 0;  // tensor memory still held after the T steps
};

struct BenchReport {
  std::size_t d = 0;
  std::size_t repetitions = 0;
  std::vector<BenchSeries> series;
  std::vector<StepperPoint> stepper;

  bool stepper_memory_constant() const;
  nlohmann::json to_json() const;
  // kind,length,median_seconds,min_seconds,max_seconds,peak_bytes,flagged
  std::string to_csv() const;
};

// Slope of the least-squares line through (log x, log y).
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

BenchReport bench_scaling(const BenchConfig& cfg,
                          const std::function<void(const std::string&)>& log = {});

}  // namespace sipm::eval
