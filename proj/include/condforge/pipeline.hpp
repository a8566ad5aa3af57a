#pragma once

// Triplet factories: ingest -> filter/annotate stages -> conditioning
// raster + manifest line, with a resumable checkpoint journal.
//
// Proportion: aesthetic (> 5.0) -> caption -> grounding -> box raster.
// Perspective: aesthetic (> 3.5) -> vanishing points -> caption -> line raster.

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "condforge/conditioning.hpp"
#include "condforge/content_hash.hpp"
#include "condforge/geometry.hpp"
#include "condforge/journal.hpp"
#include "condforge/model_clients.hpp"
#include "condforge/segment_detection.hpp"

namespace condforge {

enum class PipelineKind { Proportion, Perspective };

std::string_view to_string(PipelineKind k);
PipelineKind pipeline_kind_from_string(std::string_view name);

struct PipelineConfig {
  PipelineKind kind = PipelineKind::Proportion;
  std::filesystem::path corpus_root;
  std::filesystem::path output_dir;
  /// Unset means the per-kind default (5.0 proportion, 3.5 perspective).
  std::optional<double> aesthetic_threshold;
  double box_threshold = kDefaultBoxThreshold;
  DetectionParams detection;
  VpParams vp;
  FilterThresholds filter;
  ScenePolicy scene;
  ServiceEndpoint aesthetic_endpoint;
  ServiceEndpoint caption_endpoint;
  ServiceEndpoint ground_endpoint;
  int worker_count = 1;
  /// Records failing with RemoteUnavailable beyond this many abort the run.
  int failure_budget = 10;
  /// Stop committing after this many records, leaving the run unfinished
  /// as if the process had been killed.
  std::optional<std::size_t> interrupt_after;

  double effective_aesthetic_threshold() const;
  /// Everything that changes per-record results; a resumed run must match.
  nlohmann::json fingerprint_json() const;
  std::string fingerprint() const;
  nlohmann::json to_json() const;
};

struct IngestEntry {
  ContentId id;
  std::filesystem::path path;
};

struct IngestResult {
  std::vector<IngestEntry> entries;
  std::vector<std::string> duplicates;
  std::vector<std::string> unreadable;
};

/// Lexicographic traversal of .png/.jpg/.jpeg files (case-insensitive),
/// deduplicated by content id; the first path wins.
IngestResult ingest(const std::filesystem::path& corpus_root);

struct Funnel {
  std::size_t ingested = 0;
  std::size_t post_aesthetic = 0;
  std::size_t post_geometry = 0;
  std::size_t emitted = 0;
};

struct RunReport {
  PipelineKind kind = PipelineKind::Proportion;
  Funnel funnel;
  std::size_t duplicates = 0;
  std::size_t unreadable = 0;
  /// Records completed by this invocation (0 for a no-op resume).
  std::size_t processed = 0;
  std::map<std::string, std::size_t> status_counts;
  std::map<std::string, std::size_t> perspective_histogram;
  std::map<int, std::size_t> box_histogram;
  double wall_seconds = 0.0;
  bool finished = false;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Fresh run. Throws PipelineError if output_dir already holds a run.
RunReport run(const PipelineConfig& config);

/// Continues an interrupted run. Throws PipelineError when no checkpoint
/// exists or the configuration fingerprint differs.
RunReport resume(const PipelineConfig& config);

namespace layout {
inline std::filesystem::path images(const std::filesystem::path& out) { return out / "images"; }
inline std::filesystem::path conditioning(const std::filesystem::path& out) { return out / "conditioning"; }
inline std::filesystem::path manifest(const std::filesystem::path& out) { return out / "manifest.jsonl"; }
inline std::filesystem::path journal(const std::filesystem::path& out) { return out / "checkpoint.journal"; }
inline std::filesystem::path report(const std::filesystem::path& out) { return out / "report.json"; }
}  // namespace layout

}  // namespace condforge
