#pragma once

// Append-only checkpoint journal of record status transitions.
//
// File layout (little-endian): "CFJ1", u32 n, n bytes of config fingerprint,
// then records of u32 length + payload {id[16], stage u8, status u8,
// timestamp_ms i64, u16 m, m bytes of reason}. A torn final record is
// ignored on read.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "condforge/content_hash.hpp"
#include "condforge/record.hpp"

namespace condforge {

enum class Stage : std::uint8_t { Ingest = 0, Aesthetic, Caption, Grounding, VanishingPoint, Emit };

std::string_view to_string(Stage s);

struct JournalEntry {
  ContentId id;
  /// Last stage the record has passed.
  Stage stage = Stage::Ingest;
  RecordStatus status = RecordStatus::Pending;
  std::int64_t timestamp_ms = 0;
  std::string reason;

  bool operator==(const JournalEntry&) const = default;
};

struct JournalContents {
  std::string fingerprint;
  std::vector<JournalEntry> entries;
  /// Bytes of a torn trailing record that were ignored.
  std::uintmax_t torn_bytes = 0;
};

class JournalWriter {
 public:
  /// Creates a fresh journal, or appends to an existing one (after
  /// truncating any torn tail) when `append` is set.
  JournalWriter(const std::filesystem::path& path, const std::string& fingerprint, bool append);

  void write(const JournalEntry& entry);
  void close();

 private:
  std::ofstream out_;
};

/// Throws PipelineError when the file is missing or its header is invalid.
JournalContents read_journal(const std::filesystem::path& path);

/// Latest entry per id.
std::map<ContentId, JournalEntry> latest_entries(const std::vector<JournalEntry>& entries);

/// Rewrites the journal keeping only the latest entry per id, via a temp
/// file and rename.
void compact_journal(const std::filesystem::path& path);

/// Ids whose successive entries ever move status backward, or continue
/// after a terminal status.
std::vector<ContentId> audit_monotone(const std::vector<JournalEntry>& entries);

}  // namespace condforge
