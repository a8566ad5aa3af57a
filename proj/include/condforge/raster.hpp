#pragma once

// Integer-exact, mirror-symmetric stroke rasterization.
//
// Geometry is snapped to a half-pixel lattice measured from the canvas
// center ("half units"): pixel (i, j) of a W x H canvas sits at
// (2i - (W - 1), 2j - (H - 1)). Negating x maps the lattice onto itself, so
// mirrored input rasterizes to exactly mirrored output.

#include <array>
#include <cstdint>
#include <optional>

#include "condforge/image_io.hpp"

namespace condforge {

struct PixelPoint {
  int x = 0;
  int y = 0;
  bool operator==(const PixelPoint&) const = default;
};

/// Point in half units.
struct HalfPoint {
  long long x = 0;
  long long y = 0;
  bool operator==(const HalfPoint&) const = default;
};

/// Nearest half-unit value of a center-relative pixel offset; ties round
/// away from the center, so snap_half(-v) == -snap_half(v).
long long snap_half(double offset);

HalfPoint to_half(PixelPoint p, int width, int height);

/// Sets every pixel whose center lies within perpendicular distance
/// width / 2 (inclusive) of segment a-b, between the perpendiculars through
/// a and b (flat caps). a == b draws a width x width square.
void draw_stroke(GrayImage& image, HalfPoint a, HalfPoint b, int width, std::uint8_t value);
void draw_stroke(GrayImage& image, PixelPoint a, PixelPoint b, int width, std::uint8_t value);

/// Clips p + t d, t in [t0, t1], to |x| <= half_w, |y| <= half_h
/// (center-relative coordinates). Returns the clipped parameter interval,
/// or nullopt if the segment misses the rectangle.
std::optional<std::array<double, 2>> clip_parametric(std::array<double, 2> p, std::array<double, 2> d,
                                                     double t0, double t1, double half_w,
                                                     double half_h);

}  // namespace condforge
