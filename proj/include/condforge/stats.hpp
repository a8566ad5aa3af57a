#pragma once

// Corpus statistics over a finished (or replayed) manifest.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "condforge/manifest.hpp"

namespace condforge {

/// Stage counts as recorded in report.json; stages may be unknown.
struct FunnelCounts {
  std::optional<std::size_t> ingested;
  std::optional<std::size_t> post_aesthetic;
  std::optional<std::size_t> post_geometry;
  std::optional<std::size_t> emitted;
};

struct StatsReport {
  std::size_t total = 0;
  /// Present when any entry carries a perspective class.
  std::optional<std::map<std::string, std::size_t>> perspective_histogram;
  /// Present when any entry carries a box count.
  std::optional<std::map<int, std::size_t>> box_histogram;
  std::optional<FunnelCounts> funnel;
  std::vector<ManifestLineError> errors;
  std::vector<std::string> warnings;

  std::map<std::string, double> perspective_fractions() const;
  /// emitted / ingested from the funnel.
  std::optional<double> retention() const;
  nlohmann::json to_json() const;
};

/// Two decimals, e.g. 0.373632 -> "37.36%".
std::string format_percent(double fraction);

FunnelCounts funnel_from_report_json(const nlohmann::json& report);

/// Reads the manifest; funnel counts come from `report_path`, defaulting
/// to report.json beside the manifest when that file exists.
StatsReport compute_stats(const std::filesystem::path& manifest_path,
                          std::optional<std::filesystem::path> report_path = std::nullopt);

}  // namespace condforge
