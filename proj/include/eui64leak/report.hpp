#pragma once

// CSV rendering of an AnalysisReport and the run manifest.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eui64leak/analysis.hpp"

namespace eui64leak {

inline constexpr std::string_view kToolName = "eui64leak";
inline constexpr std::string_view kToolVersion = "0.3.0";
inline constexpr std::string_view kManifestName = "manifest.json";

// File name -> CSV content for every report table.
std::map<std::string, std::string> render_report(const AnalysisReport& report);

std::string render_tracking_csv(const TrackingTable& table);

// Manifest layout:
//   tool, version, subcommand, config{}, prf, digest, key_fingerprint,
//   inputs{name: digest}, outputs{file: digest}
struct RunManifest {
  std::string subcommand;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::pair<std::string, std::string>> inputs;  // basename -> digest
  std::string key_fingerprint;

  nlohmann::ordered_json to_json(const std::map<std::string, std::string>& output_digests) const;
};

// Writes every file, then manifest.json with their digests.
void write_run_directory(const std::filesystem::path& dir, const std::map<std::string, std::string>& files,
                         const RunManifest& manifest);

// Re-digests every output listed in a run directory's manifest. Returns one
// message per mismatch or missing file; empty when intact.
std::vector<std::string> check_run_directory(const std::filesystem::path& dir);

}  // namespace eui64leak
