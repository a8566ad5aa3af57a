#pragma once

// Triplet manifest: JSONL, one emitted training triplet per line, paths
// relative to the output directory.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "condforge/content_hash.hpp"
#include "condforge/geometry.hpp"

namespace condforge {

struct ManifestEntry {
  ContentId id;
  std::string image_path;
  std::string conditioning_path;
  std::string prompt;
  std::optional<PerspectiveClass> perspective;
  std::optional<int> boxes;

  bool operator==(const ManifestEntry&) const = default;
};

/// Single line without the trailing newline; keys in sorted order.
std::string to_json_line(const ManifestEntry& entry);
/// Throws Error naming the problem.
ManifestEntry parse_manifest_line(const std::string& line);

struct ManifestLineError {
  int line = 0;
  std::string message;
};

struct ManifestContents {
  std::vector<ManifestEntry> entries;
  std::vector<ManifestLineError> errors;
};

/// Malformed lines are reported, not fatal.
ManifestContents read_manifest(const std::filesystem::path& path);

class ManifestWriter {
 public:
  explicit ManifestWriter(const std::filesystem::path& path);
  void append(const ManifestEntry& entry);

 private:
  std::ofstream out_;
};

/// Drops a torn final line and every entry whose id is not in `keep`.
/// Returns the ids that remain.
std::set<ContentId> reconcile_manifest(const std::filesystem::path& path, const std::set<ContentId>& keep);

/// Rewrites the manifest sorted by id.
void canonicalize_manifest(const std::filesystem::path& path);

}  // namespace condforge
