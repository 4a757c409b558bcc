// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "data/norm_stats.hpp"

#include <algorithm>
#include <cmath>

#include "data/binary_io.hpp"
#include "data/feature_io.hpp"
#include "model/sip_model.hpp"

namespace sipm::data {

using nlohmann::json;

NormAccumulator::NormAccumulator(std::size_t layers, std::size_t dim, bool per_layer)
    : layers_(layers), dim_(dim), per_layer_(per_layer) {
  const std::size_t rows = per_layer ? layers : 1;
  mean_.assign(rows * dim, 0.0);
  m2_.assign(rows * dim, 0.0);
  count_.assign(rows, 0);
}

void NormAccumulator::add(const Tensor<float>& feats) {
  if (feats.rank() != 3 || feats.dim(0) != layers_ || feats.dim(2) != dim_) {
    throw ShapeError("norm stats: features " + shape_str(feats.shape()) + " vs expected " +
                     std::to_string(layers_) + " x T x " + std::to_string(dim_));
  }
  const std::size_t t = feats.dim(1);
  for (std::size_t l = 0; l < layers_; ++l) {
    const std::size_t row = per_layer_ ? l : 0;
    double* mean = mean_.data() + row * dim_;
    double* m2 = m2_.data() + row * dim_;
    for (std::size_t f = 0; f < t; ++f) {
      const double n = static_cast<double>(++count_[row]);
      const float* x = feats.ptr() + (l * t + f) * dim_;
      for (std::size_t j = 0; j < dim_; ++j) {
        const double delta = x[j] - mean[j];
        mean[j] += delta / n;
        m2[j] += delta * (x[j] - mean[j]);
      }
    }
  }
}

NormStats NormAccumulator::finish(const std::string& split) const {
  const std::size_t rows = per_layer_ ? layers_ : 1;
  if (count_[0] == 0) throw DataError("norm stats: no frames accumulated");
  NormStats s;
  s.split = split;
  s.per_layer = per_layer_;
  s.frames = count_[0];
  s.mean = Tensor<double>(Shape{rows, dim_});
  s.std = Tensor<double>(Shape{rows, dim_});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < dim_; ++j) {
      const std::size_t i = r * dim_ + j;
      s.mean[i] = mean_[i];
      s.std[i] = std::max(std::sqrt(m2_[i] / static_cast<double>(count_[r])), model::kStdFloor);
    }
  }
  return s;
}

NormStats compute_norm_stats(const std::vector<ManifestEntry>& entries, bool per_layer,
                             const std::string& split) {
  if (entries.empty()) throw DataError("norm stats: no samples selected");
  std::optional<NormAccumulator> acc;
  auto take = [&](const std::filesystem::path& p) {
    const Tensor<float> feats = read_features<float>(p);
    if (!acc) acc.emplace(feats.dim(0), feats.dim(2), per_layer);
    acc->add(feats);
  };
  for (const auto& e : entries) {
    take(e.left);
    if (e.right) take(*e.right);
  }
  return acc->finish(split);
}

json stats_to_json(const NormStats& s) {
  auto rows = [](const Tensor<double>& t) {
    json out = json::array();
    for (std::size_t r = 0; r < t.dim(0); ++r) {
      out.push_back(std::vector<double>(t.ptr() + r * t.dim(1), t.ptr() + (r + 1) * t.dim(1)));
    }
    return out;
  };
  return json{{"format", "sipm-norm-stats"}, {"version", 1},       {"split", s.split},
              {"per_layer", s.per_layer},    {"frames", s.frames}, {"mean", rows(s.mean)},
              {"std", rows(s.std)}};
}

NormStats stats_from_json(const json& j) {
  try {
    if (j.at("format") != "sipm-norm-stats" || j.at("version") != 1) {
      throw DataError("not a version-1 norm stats document");
    }
    auto tensor = [](const json& rows) {
      const auto vv = rows.get<std::vector<std::vector<double>>>();
      if (vv.empty() || vv[0].empty()) throw DataError("norm stats: empty table");
      Tensor<double> t(Shape{vv.size(), vv[0].size()});
      for (std::size_t r = 0; r < vv.size(); ++r) {
        if (vv[r].size() != vv[0].size()) throw DataError("norm stats: ragged table");
        std::copy(vv[r].begin(), vv[r].end(), t.ptr() + r * t.dim(1));
      }
      return t;
    };
    NormStats s;
    s.split = j.at("split").get<std::string>();
    s.per_layer = j.at("per_layer").get<bool>();
    s.frames = j.at("frames").get<std::size_t>();
    s.mean = tensor(j.at("mean"));
    s.std = tensor(j.at("std"));
    if (s.mean.shape() != s.std.shape()) throw DataError("norm stats: mean/std shapes differ");
    for (std::size_t i = 0; i < s.std.size(); ++i) {
      if (!(s.std[i] >= model::kStdFloor) || !std::isfinite(s.mean[i])) {
        throw DataError("norm stats: invalid value at index " + std::to_string(i));
      }
    }
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("norm stats: ") + e.what());
  }
}

void save_norm_stats(const std::filesystem::path& path, const NormStats& s) {
  write_text(path, stats_to_json(s).dump(2) + "\n");
}

NormStats load_norm_stats(const std::filesystem::path& path) {
  try {
    return stats_from_json(json::parse(read_text(path)));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace sipm::data
