// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "eval/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "blocks/blocks.hpp"

namespace sipm::eval {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string bench_kind_name(BenchKind k) { return k == BenchKind::kAttention ? "attention" : "mamba"; }

BenchKind parse_bench_kind(const std::string& name) {
  if (name == "attention") return BenchKind::kAttention;
  if (name == "mamba") return BenchKind::kMamba;
  throw UsageError("unknown bench kind '" + name + "' (known: attention, mamba)");
}

void BenchConfig::validate() const {
  if (kinds.empty()) throw UsageError("bench: no block kinds");
  if (d == 0 || repetitions == 0) throw UsageError("bench: d and repetitions must be positive");
  if (lengths.size() < 2) throw UsageError("bench: need at least two lengths");
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] == 0 || (i > 0 && lengths[i] <= lengths[i - 1])) {
      throw UsageError("bench: lengths must be positive and strictly increasing");
    }
  }
  if (lengths.back() < 8 * lengths.front()) {
    throw UsageError("bench: lengths must span at least three doublings");
  }
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("fit needs two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw UsageError("fit needs distinct x values");
  return sxy / sxx;
}

bool BenchReport::stepper_memory_constant() const {
  if (stepper.empty()) return false;
  for (const auto& p : stepper) {
    if (p.state_bytes != stepper.front().state_bytes || p.live_bytes != stepper.front().live_bytes) {
      return false;
    }
  }
  return true;
}

json BenchReport::to_json() const {
  json ss = json::array();
  for (const auto& s : series) {
    json pts = json::array();
    for (const auto& p : s.points) {
      pts.push_back({{"length", p.length},
                     {"median_seconds", p.median_seconds},
                     {"seconds", p.seconds},
                     {"peak_bytes", p.peak_bytes},
                     {"flagged", p.flagged}});
    }
    ss.push_back({{"kind", bench_kind_name(s.kind)},
                  {"exponent", s.exponent},
                  {"fitted_points", s.fitted_points},
                  {"points", pts}});
  }
  json st = json::array();
  for (const auto& p : stepper) {
    st.push_back({{"length", p.length}, {"state_bytes", p.state_bytes}, {"live_bytes", p.live_bytes}});
  }
  return json{{"format", "sipm-bench"},
              {"version", 1},
              {"d", d},
              {"repetitions", repetitions},
              {"series", ss},
              {"stepper", st},
              {"stepper_memory_constant", stepper_memory_constant()}};
}

std::string BenchReport::to_csv() const {
  std::ostringstream out;
  out << "kind,length,median_seconds,min_seconds,max_seconds,peak_bytes,flagged\n";
  out.precision(9);
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      const auto [lo, hi] = std::minmax_element(p.seconds.begin(), p.seconds.end());
      out << bench_kind_name(s.kind) << ',' << p.length << ',' << p.median_seconds << ',' << *lo
          << ',' << *hi << ',' << p.peak_bytes << ',' << (p.flagged ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Tensor<float> random_input(std::size_t t, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<float> n01(0.0f, 1.0f);
  Tensor<float> x(Shape{t, d});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = n01(rng);
  return x;
}

blocks::MambaDims bench_dims() {
  blocks::MambaDims dims;
  dims.scan = ssm::ScanMode::kSequential;
  return dims;
}

}  // namespace

BenchReport bench_scaling(const BenchConfig& cfg, const std::function<void(const std::string&)>& log) {
  cfg.validate();
  BenchReport report;
  report.d = cfg.d;
  report.repetitions = cfg.repetitions;
  std::mt19937_64 rng(cfg.seed);
  ParamSet<float> params;
  blocks::declare_attention(params, "attn", cfg.d, rng);
  const blocks::MambaDims dims = bench_dims();
  blocks::declare_mamba(params, "mamba", cfg.d, dims, rng);

  for (BenchKind kind : cfg.kinds) {
    BenchSeries series;
    series.kind = kind;
    std::vector<Var<float>> inputs;
    for (std::size_t t : cfg.lengths) {
      inputs.push_back(Var<float>::constant(random_input(t, cfg.d, rng)));
      BenchPoint p;
      p.length = t;
      series.points.push_back(std::move(p));
    }
    // Repetitions sweep all lengths in turn, so slow drift in machine speed
    // lands on every length alike.
    for (std::size_t r = 0; r < cfg.repetitions; ++r) {
      for (std::size_t i = 0; i < cfg.lengths.size(); ++i) {
        BenchPoint& p = series.points[i];
        const std::size_t base = memory::live_bytes();
        memory::reset_peak();
        Graph<float> g(params, nullptr, Mode::kEval);
        const auto start = Clock::now();
        const Var<float> y = kind == BenchKind::kAttention
                                 ? blocks::self_attention(g, "attn", inputs[i], 0.0)
                                 : blocks::mamba_core(g, "mamba", inputs[i], dims);
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        p.seconds.push_back(secs);
        p.peak_bytes = std::max(p.peak_bytes, memory::peak_bytes() - base);
        if (y.value().size() != p.length * cfg.d) throw ShapeError("bench: unexpected output size");
      }
    }
    std::vector<double> xs, ys;
    for (BenchPoint& p : series.points) {
      p.median_seconds = median(p.seconds);
      p.flagged = p.median_seconds < cfg.min_seconds;
      if (!p.flagged) {
        xs.push_back(static_cast<double>(p.length));
        ys.push_back(p.median_seconds);
      }
      if (log) {
        log(bench_kind_name(kind) + " T=" + std::to_string(p.length) +
            " median=" + std::to_string(p.median_seconds) + "s" + (p.flagged ? " (flagged)" : ""));
      }
    }
    series.fitted_points = xs.size();
    series.exponent = xs.size() >= 2 ? fit_loglog_slope(xs, ys) : std::nan("");
    report.series.push_back(std::move(series));
  }

  for (std::size_t t : cfg.lengths) {
    const std::size_t base = memory::live_bytes();
    blocks::MambaStepper<float> stepper(params, "mamba", cfg.d, dims);
    const Tensor<float> frame = random_input(1, cfg.d, rng).reshaped(Shape{cfg.d});
    for (std::size_t i = 0; i < t; ++i) stepper.step(frame);
    report.stepper.push_back({t, stepper.state_bytes(), memory::live_bytes() - base});
  }
  return report;
}

}  // namespace sipm::eval
