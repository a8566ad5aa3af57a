#pragma once

#include <vector>

#include "condforge/geometry.hpp"
#include "condforge/image_io.hpp"

namespace condforge {

struct DetectionParams {
  /// Gradient magnitude threshold, 8-bit units.
  double gradient_threshold = 16.0;
  /// Level-line agreement for region growing.
  double angle_tolerance_deg = 22.5;
  /// Minimum output length as a fraction of the image diagonal.
  double min_length_fraction = 0.02;
  /// Regions wider than this fraction of their length (principal-axis
  /// standard deviations) are not line-like and are dropped.
  double max_aspect_ratio = 0.5;
  /// Gaussian pre-smoothing (pixels); suppresses staircase gradients on
  /// aliased edges. 0 disables.
  double smoothing_sigma = 1.0;
  /// Collinear pieces (e.g. the two edges of a drawn stroke, or a line cut
  /// by a crossing) within these bounds are fused.
  double merge_angle_deg = 3.0;
  double merge_distance_fraction = 0.012;
  /// Largest end-to-end gap bridged when fusing collinear pieces (crossing
  /// strokes interrupt a line's gradient).
  double merge_gap_fraction = 0.05;
};

/// Segment in pixel-center coordinates (pixel (i, j) centered at (i, j)).
struct PixelSegment {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double length() const;
};

constexpr int kMinDetectionSize = 16;

/// Region-growing detector. Output sorted by descending length.
/// Throws ImageError if either side is below kMinDetectionSize.
std::vector<PixelSegment> detect_segments_px(const GrayImage& image, const DetectionParams& params = {});

/// Same, in normalized coordinates.
std::vector<LineSegment> detect_segments(const GrayImage& image, const DetectionParams& params = {});

}  // namespace condforge
