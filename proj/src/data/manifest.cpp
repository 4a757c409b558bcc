// Copyright 2026 The sipmamba Authors
//
// Licensed under the Apache License, Version 2.0

#include "data/manifest.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "common/error.hpp"
#include "data/binary_io.hpp"
#include "json.hpp"

namespace sipm::data {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::vector<double> thresholds(const json& j, const char* key, const std::string& where) {
  if (!j.is_array() || j.empty()) throw DataError(where + ": '" + key + "' must be a non-empty array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw DataError(where + ": '" + key + "' holds a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

ManifestEntry parse_entry(const json& j, const fs::path& base, const std::string& where) {
  static const std::set<std::string> known = {"id",          "left",  "right",
                                              "audiogram_left", "audiogram_right",
                                              "label",       "split"};
  if (!j.is_object()) throw DataError(where + ": entry must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw DataError(where + ": unknown field '" + key + "'");
  }
  for (const char* key : {"id", "left", "audiogram_left", "label", "split"}) {
    if (!j.contains(key)) throw DataError(where + ": missing field '" + key + "'");
  }
  auto str = [&](const char* key) {
    if (!j.at(key).is_string()) throw DataError(where + ": '" + key + "' must be a string");
    return j.at(key).get<std::string>();
  };
  ManifestEntry e;
  e.id = str("id");
  if (e.id.empty()) throw DataError(where + ": empty id");
  e.left = base / str("left");
  if (j.contains("right")) e.right = base / str("right");
  e.audiogram_left = thresholds(j.at("audiogram_left"), "audiogram_left", where);
  if (j.contains("audiogram_right")) {
    e.audiogram_right = thresholds(j.at("audiogram_right"), "audiogram_right", where);
  }
  if (e.right.has_value() != e.audiogram_right.has_value()) {
    throw DataError(where + ": 'right' and 'audiogram_right' must be given together");
  }
  if (!j.at("label").is_number()) throw DataError(where + ": 'label' must be a number");
  e.label = j.at("label").get<double>();
  if (!(e.label >= 0.0 && e.label <= 100.0)) {
    throw DataError(where + ": label " + std::to_string(e.label) + " outside [0, 100]");
  }
  e.split = str("split");
  return e;
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const fs::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!header_seen) {
      if (!j.is_object() || j.value("format", "") != kManifestFormat) {
        throw DataError(where + ": missing manifest header line");
      }
      if (j.value("version", 0) != kManifestVersion) {
        throw DataError(where + ": unsupported manifest version");
      }
      header_seen = true;
      continue;
    }
    ManifestEntry e = parse_entry(j, base, where);
    if (!ids.insert(e.id).second) throw DataError(where + ": duplicate id '" + e.id + "'");
    if (check_files) {
      if (!fs::exists(e.left)) throw DataError(where + ": missing file " + e.left.string());
      if (e.right && !fs::exists(*e.right)) {
        throw DataError(where + ": missing file " + e.right->string());
      }
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  auto rel = [&](const fs::path& p) {
    return fs::weakly_canonical(p).lexically_relative(fs::weakly_canonical(base)).generic_string();
  };
  std::ostringstream out;
  out << json{{"format", kManifestFormat}, {"version", kManifestVersion}}.dump() << '\n';
  for (const auto& e : entries) {
    json j = {{"id", e.id}, {"left", rel(e.left)}, {"audiogram_left", e.audiogram_left}};
    if (e.right) {
      j["right"] = rel(*e.right);
      j["audiogram_right"] = *e.audiogram_right;
    }
    j["label"] = e.label;
    j["split"] = e.split;
    out << j.dump() << '\n';
  }
  write_text(path, out.str());
}

std::vector<ManifestEntry> select_split(const std::vector<ManifestEntry>& entries,
                                        const std::string& split) {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (split.empty() || e.split == split) out.push_back(e);
  return out;
}

}  // namespace sipm::data
