#pragma once

// Per-image annotation accumulator shared by the pipeline stages.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "condforge/content_hash.hpp"
#include "condforge/geometry.hpp"

namespace condforge {

/// Fractions of image width/height. The label is metadata only and never
/// affects rendering.
struct BoundingBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;
  std::string label;

  bool valid() const {
    return x0 >= 0.0 && y0 >= 0.0 && x1 <= 1.0 && y1 <= 1.0 && x0 < x1 && y0 < y1;
  }
  bool operator==(const BoundingBox&) const = default;
};

struct CaptionPair {
  std::string short_caption;
  std::string detailed_caption;

  bool operator==(const CaptionPair&) const = default;
};

struct GroundedBox {
  BoundingBox box;
  std::string phrase;
  double confidence = 0.0;
};

/// Stage order; a record's status only ever moves forward along it.
enum class RecordStatus { Pending = 0, FilteredAesthetic, FilteredGeometry, Annotated, Emitted, Failed };

std::string_view to_string(RecordStatus s);
bool is_terminal(RecordStatus s);
/// True when `to` is a legal successor of `from`.
bool is_forward_transition(RecordStatus from, RecordStatus to);

struct ImageRecord {
  ContentId id;
  std::string source_path;
  int width = 0;
  int height = 0;
  std::optional<double> aesthetic;
  std::optional<CaptionPair> captions;
  std::optional<std::vector<GroundedBox>> boxes;
  std::optional<int> segments_count;
  /// Detected segments backing `frame`; in-memory only.
  std::vector<LineSegment> segments;
  std::optional<ManhattanFrame> frame;
  std::optional<PerspectiveClass> perspective;
  RecordStatus status = RecordStatus::Pending;
  std::string failure_reason;
};

}  // namespace condforge
