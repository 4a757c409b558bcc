// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

// Line-delimited JSON. The first line is {"format":"sipm-manifest","version":1};
// each further line is one entry. Feature paths are relative to the manifest.
namespace sipm::data {

inline constexpr const char* kManifestFormat = "sipm-manifest";
inline constexpr int kManifestVersion = 1;

struct ManifestEntry {
  std::string id;
  std::filesystem::path left;                  // resolved
  std::optional<std::filesystem::path> right;  // resolved
  std::vector<double> audiogram_left;          // dB HL
  std::optional<std::vector<double>> audiogram_right;
  double label = 0.0;  // percent correct
  std::string split;

  bool binaural() const { return right.has_value(); }
};

// Rejects malformed lines (with the line number), labels outside [0, 100],
// duplicate ids and, when check_files is set, missing feature files.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path,
                                         bool check_files = true);
// Paths are written relative to the manifest's directory.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

// Entries whose split equals `split`, in manifest order; "" selects all.
std::vector<ManifestEntry> select_split(const std::vector<ManifestEntry>& entries,
                                        const std::string& split);

}  // namespace sipm::data
