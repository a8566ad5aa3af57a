#include "condforge/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace condforge {
namespace {

// Pixel index of the lattice value q on an axis of n pixels (q has the
// parity of n - 1 for pixel centers; other values round down).
long long pixel_floor(double q, int n) { return static_cast<long long>(std::floor((q + (n - 1)) / 2.0)); }
long long pixel_ceil(double q, int n) { return static_cast<long long>(std::ceil((q + (n - 1)) / 2.0)); }

}  // namespace

long long snap_half(double offset) {
  // Keeps far-off-canvas points finite without breaking symmetry.
  constexpr double kLimit = 1e9;
  return std::llround(std::clamp(2.0 * offset, -kLimit, kLimit));
}

HalfPoint to_half(PixelPoint p, int width, int height) {
  return {2LL * p.x - (width - 1), 2LL * p.y - (height - 1)};
}

void draw_stroke(GrayImage& image, PixelPoint a, PixelPoint b, int width, std::uint8_t value) {
  draw_stroke(image, to_half(a, image.width, image.height), to_half(b, image.width, image.height), width, value);
}

void draw_stroke(GrayImage& image, HalfPoint a, HalfPoint b, int width, std::uint8_t value) {
  const long long w = std::max(width, 1);
  const int W = image.width;
  const int H = image.height;
  auto qx = [&](long long i) { return 2 * i - (W - 1); };
  auto qy = [&](long long j) { return 2 * j - (H - 1); };
  auto set = [&](long long i, long long j) {
    if (i >= 0 && j >= 0 && i < W && j < H) image.at(static_cast<int>(i), static_cast<int>(j)) = value;
  };

  const long long dx = b.x - a.x;
  const long long dy = b.y - a.y;
  if (dx == 0 && dy == 0) {
    const long long i0 = std::max(0LL, pixel_ceil(static_cast<double>(a.x - w), W));
    const long long i1 = std::min<long long>(W - 1, pixel_floor(static_cast<double>(a.x + w), W));
    const long long j0 = std::max(0LL, pixel_ceil(static_cast<double>(a.y - w), H));
    const long long j1 = std::min<long long>(H - 1, pixel_floor(static_cast<double>(a.y + w), H));
    for (long long j = j0; j <= j1; ++j)
      for (long long i = i0; i <= i1; ++i) set(i, j);
    return;
  }

  // In half units the half-width is w, so the test is c^2 <= w^2 |d|^2.
  const long long len2 = dx * dx + dy * dy;
  const long long limit = w * w * len2;
  auto inside = [&](long long i, long long j) {
    const long long rx = qx(i) - a.x;
    const long long ry = qy(j) - a.y;
    const long long t = rx * dx + ry * dy;
    if (t < 0 || t > len2) return false;
    const long long c = rx * dy - ry * dx;
    return c * c <= limit;
  };

  const double len = std::sqrt(static_cast<double>(len2));
  const bool x_major = std::llabs(dx) >= std::llabs(dy);
  // Candidate band along the minor axis; `inside` decides membership.
  if (x_major) {
    const double band = static_cast<double>(w) * len / static_cast<double>(std::llabs(dx)) + 4.0;
    const long long i0 = std::max(0LL, pixel_floor(static_cast<double>(std::min(a.x, b.x) - w), W));
    const long long i1 = std::min<long long>(W - 1, pixel_ceil(static_cast<double>(std::max(a.x, b.x) + w), W));
    for (long long i = i0; i <= i1; ++i) {
      const double yc = a.y + static_cast<double>(qx(i) - a.x) * static_cast<double>(dy) / static_cast<double>(dx);
      const long long j0 = std::max(0LL, pixel_floor(yc - band, H));
      const long long j1 = std::min<long long>(H - 1, pixel_ceil(yc + band, H));
      for (long long j = j0; j <= j1; ++j)
        if (inside(i, j)) set(i, j);
    }
  } else {
    const double band = static_cast<double>(w) * len / static_cast<double>(std::llabs(dy)) + 4.0;
    const long long j0 = std::max(0LL, pixel_floor(static_cast<double>(std::min(a.y, b.y) - w), H));
    const long long j1 = std::min<long long>(H - 1, pixel_ceil(static_cast<double>(std::max(a.y, b.y) + w), H));
    for (long long j = j0; j <= j1; ++j) {
      const double xc = a.x + static_cast<double>(qy(j) - a.y) * static_cast<double>(dx) / static_cast<double>(dy);
      const long long i0 = std::max(0LL, pixel_floor(xc - band, W));
      const long long i1 = std::min<long long>(W - 1, pixel_ceil(xc + band, W));
      for (long long i = i0; i <= i1; ++i)
        if (inside(i, j)) set(i, j);
    }
  }
}

std::optional<std::array<double, 2>> clip_parametric(std::array<double, 2> p, std::array<double, 2> d,
                                                     double t0, double t1, double half_w,
                                                     double half_h) {
  // Liang-Barsky; opposite boundaries are handled with negated terms so the
  // result is symmetric under x -> -x.
  const double ps[4] = {-d[0], d[0], -d[1], d[1]};
  const double qs[4] = {p[0] + half_w, half_w - p[0], p[1] + half_h, half_h - p[1]};
  for (int k = 0; k < 4; ++k) {
    if (ps[k] == 0.0) {
      if (qs[k] < 0.0) return std::nullopt;
      continue;
    }
    const double r = qs[k] / ps[k];
    if (ps[k] < 0.0) {
      t0 = std::max(t0, r);
    } else {
      t1 = std::min(t1, r);
    }
  }
  if (t0 > t1) return std::nullopt;
  return std::array<double, 2>{t0, t1};
}

}  // namespace condforge
