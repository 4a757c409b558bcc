// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "numerics/tensor.hpp"

// Feature files: "SIPF", u32 version, u32 L, u32 T, u32 D_in, u32 precision
// (1 = f32, 2 = f64), then L*T*D_in little-endian values, layer-major.
namespace sipm::data {

inline constexpr char kFeatureMagic[4] = {'S', 'I', 'P', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 24;

enum class Precision : std::uint32_t { kF32 = 1, kF64 = 2 };

struct FeatureHeader {
  std::uint32_t version = kFeatureVersion;
  std::uint32_t layers = 0;
  std::uint32_t frames = 0;
  std::uint32_t dim = 0;
  Precision precision = Precision::kF32;

  std::size_t element_bytes() const { return precision == Precision::kF64 ? 8 : 4; }
  std::size_t payload_bytes() const {
    return std::size_t{layers} * frames * dim * element_bytes();
  }
};

// feats is L x T x D_in. The element type selects the precision code.
template <typename S>
std::vector<char> encode_features(const Tensor<S>& feats);
template <typename S>
void write_features(const std::filesystem::path& path, const Tensor<S>& feats);

FeatureHeader decode_feature_header(const std::vector<char>& bytes, const std::string& source);
// Values stored at either precision are converted to S.
template <typename S>
Tensor<S> decode_features(const std::vector<char>& bytes, const std::string& source);
template <typename S>
Tensor<S> read_features(const std::filesystem::path& path);

}  // namespace sipm::data
