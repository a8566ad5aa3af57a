#pragma once

// Conditioning rasters: bounding-box proportion maps and vanishing-line maps.

#include <span>
#include <string>
#include <vector>

#include "condforge/geometry.hpp"
#include "condforge/image_io.hpp"
#include "condforge/record.hpp"

namespace condforge {

struct VanishingLineBundle {
  HomogeneousPoint vp;
  std::vector<NormalizedPoint> anchors;
  /// When the VP lies on the canvas, strokes stop at it instead of
  /// running through.
  bool extend_to_vp = true;

  bool operator==(const VanishingLineBundle&) const = default;
};

struct RenderStyle {
  int line_width = 3;
  std::uint8_t foreground = 255;
  std::uint8_t background = 0;
  int max_lines_per_bundle = 8;

  /// Default style with the stroke width scaled from 3 px at 1024.
  static RenderStyle for_canvas(int width, int height);
  bool operator==(const RenderStyle&) const = default;
};

struct Canvas {
  int width = 1024;
  int height = 1024;
};

constexpr int kMinCanvasSize = 64;

struct SceneSpec {
  int canvas_width = 1024;
  int canvas_height = 1024;
  std::vector<BoundingBox> boxes;
  std::vector<VanishingLineBundle> bundles;
  RenderStyle style;

  Canvas canvas() const { return {canvas_width, canvas_height}; }
  bool operator==(const SceneSpec&) const = default;
};

struct RenderResult {
  GrayImage image;
  std::vector<std::string> warnings;
};

/// Rectangle outlines (not filled), stroke width style.line_width.
GrayImage render_boxes(std::span<const BoundingBox> boxes, Canvas canvas, const RenderStyle& style);

/// Up to style.max_lines_per_bundle strokes per bundle, each through an
/// anchor toward the bundle's VP, clipped to the canvas. Anchors coinciding
/// with a finite VP are skipped with a warning.
RenderResult render_vanishing_lines(std::span<const VanishingLineBundle> bundles, Canvas canvas,
                                    const RenderStyle& style);

/// Boxes and bundles on one canvas.
RenderResult render_scene(const SceneSpec& scene);

GrayImage mirror_horizontal(const GrayImage& image);
SceneSpec mirror_horizontal(const SceneSpec& scene);

struct ScenePolicy {
  int lines_per_axis = 6;
};

/// Perspective records (frame + segments) become one bundle per supported
/// axis anchored at the midpoints of its longest members; proportion records
/// copy their boxes. Throws Error when the record has neither.
SceneSpec annotation_to_scene(const ImageRecord& record, const ScenePolicy& policy = {});

}  // namespace condforge
