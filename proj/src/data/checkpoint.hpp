// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <filesystem>
#include <optional>

#include "data/norm_stats.hpp"
#include "json.hpp"
#include "model/sip_model.hpp"
#include "training/optimizer.hpp"

// Checkpoint files: "SIPC", u32 version, then
//   string config JSON
//   u32 tensor count, per tensor: string name, u32 ndim, u32 dims[ndim],
//       f32 values
//   u8 has_norm [string norm-stats JSON]
//   u8 has_opt  [u64 step, f32 first moments, f32 second moments]
//   string metadata JSON
// Strings are a u32 byte length followed by UTF-8 bytes. Everything is
// little-endian.
namespace sipm::data {

inline constexpr char kCheckpointMagic[4] = {'S', 'I', 'P', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  model::ModelConfig config;
  ParamSet<float> params;
  std::optional<NormStats> norm;
  std::optional<training::AdamState> optimizer;
  nlohmann::json meta = nlohmann::json::object();
};

std::vector<char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<char>& bytes, const std::string& source);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Validates parameter names and shapes against the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sipm::data
