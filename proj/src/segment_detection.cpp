#include "condforge/segment_detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "condforge/error.hpp"

namespace condforge {
namespace {

struct Gradients {
  int width = 0;
  int height = 0;
  std::vector<float> magnitude;
  std::vector<float> angle;  // level-line angle, (-pi, pi]
};

struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> v;
  float at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

FloatImage smooth(const GrayImage& img, double sigma) {
  FloatImage out{img.width, img.height, std::vector<float>(img.pixels.begin(), img.pixels.end())};
  if (sigma <= 0.0) return out;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<float> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = static_cast<float>(std::exp(-(k * k) / (2.0 * sigma * sigma)));
    total += kernel[k + radius];
  }
  for (auto& k : kernel) k = static_cast<float>(k / total);
  const int w = img.width, h = img.height;
  std::vector<float> tmp(out.v.size());
  // Edge pixels are replicated.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * out.at(std::clamp(x + k, 0, w - 1), y);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * tmp[static_cast<std::size_t>(std::clamp(y + k, 0, h - 1)) * w + x];
      }
      out.v[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

// 2x2 gradient, located at the shared corner (x + 0.5, y + 0.5).
Gradients compute_gradients(const FloatImage& img) {
  Gradients g;
  g.width = img.width;
  g.height = img.height;
  const std::size_t n = img.v.size();
  g.magnitude.assign(n, 0.0f);
  g.angle.assign(n, 0.0f);
  for (int y = 0; y + 1 < img.height; ++y) {
    for (int x = 0; x + 1 < img.width; ++x) {
      const double com1 = double(img.at(x + 1, y + 1)) - img.at(x, y);
      const double com2 = double(img.at(x + 1, y)) - img.at(x, y + 1);
      const double gx = (com1 + com2) / 2.0;
      const double gy = (com1 - com2) / 2.0;
      const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      g.magnitude[i] = static_cast<float>(std::hypot(gx, gy));
      g.angle[i] = static_cast<float>(std::atan2(gx, -gy));
    }
  }
  return g;
}

double angle_diff(double a, double b) {
  double d = std::abs(a - b);
  while (d > kPi) d = std::abs(d - 2.0 * kPi);
  return d;
}

struct Piece {
  std::vector<std::array<float, 2>> points;
  PixelSegment seg;
  double angle = 0.0;  // principal axis, [0, pi)
  double len = 0.0;
};

struct AxisFit {
  double cx, cy, ex, ey, lambda1, lambda2;
};

AxisFit principal_axis(const std::vector<std::array<float, 2>>& pts) {
  double sx = 0, sy = 0;
  for (const auto& p : pts) {
    sx += p[0];
    sy += p[1];
  }
  const double n = static_cast<double>(pts.size());
  const double cx = sx / n, cy = sy / n;
  double cxx = 0, cxy = 0, cyy = 0;
  for (const auto& p : pts) {
    const double dx = p[0] - cx, dy = p[1] - cy;
    cxx += dx * dx;
    cxy += dx * dy;
    cyy += dy * dy;
  }
  cxx /= n;
  cxy /= n;
  cyy /= n;
  const double tr = cxx + cyy;
  const double disc = std::sqrt(std::max(0.0, (cxx - cyy) * (cxx - cyy) / 4.0 + cxy * cxy));
  const double l1 = tr / 2.0 + disc;
  const double l2 = std::max(0.0, tr / 2.0 - disc);
  const double theta = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
  return {cx, cy, std::cos(theta), std::sin(theta), l1, l2};
}

void fit_piece(Piece& piece, const AxisFit& fit) {
  double tmin = 0, tmax = 0;
  bool first = true;
  for (const auto& p : piece.points) {
    const double t = (p[0] - fit.cx) * fit.ex + (p[1] - fit.cy) * fit.ey;
    if (first || t < tmin) tmin = t;
    if (first || t > tmax) tmax = t;
    first = false;
  }
  piece.seg = {fit.cx + tmin * fit.ex, fit.cy + tmin * fit.ey, fit.cx + tmax * fit.ex,
               fit.cy + tmax * fit.ey};
  piece.len = tmax - tmin;
  double a = std::atan2(fit.ey, fit.ex);
  if (a < 0) a += kPi;
  if (a >= kPi) a -= kPi;
  piece.angle = a;
}

double line_distance(const PixelSegment& s, double x, double y) {
  const double dx = s.x2 - s.x1, dy = s.y2 - s.y1;
  const double len = std::hypot(dx, dy);
  if (len == 0.0) return std::hypot(x - s.x1, y - s.y1);
  return std::abs((x - s.x1) * dy - (y - s.y1) * dx) / len;
}

// b is fused into a when it lies along a's line: both of its endpoints
// within max_dist of that line, its direction agreeing (short pieces get a
// looser bound since their fitted angle is noisy), and the gap between them
// along the line at most max_gap. Returns that gap, or a negative value.
double merge_gap(const Piece& a, const Piece& b, double max_angle, double max_dist, double max_gap) {
  const Piece& lng = a.len >= b.len ? a : b;
  const Piece& sht = a.len >= b.len ? b : a;
  double da = std::abs(a.angle - b.angle);
  da = std::min(da, kPi - da);
  if (da > std::max(max_angle, std::atan2(2.0 * max_dist, sht.len))) return -1.0;
  if (line_distance(lng.seg, sht.seg.x1, sht.seg.y1) > max_dist ||
      line_distance(lng.seg, sht.seg.x2, sht.seg.y2) > max_dist) {
    return -1.0;
  }
  const double ux = (lng.seg.x2 - lng.seg.x1) / lng.len, uy = (lng.seg.y2 - lng.seg.y1) / lng.len;
  auto proj = [&](double x, double y) { return (x - lng.seg.x1) * ux + (y - lng.seg.y1) * uy; };
  const double b0 = std::min(proj(sht.seg.x1, sht.seg.y1), proj(sht.seg.x2, sht.seg.y2));
  const double b1 = std::max(proj(sht.seg.x1, sht.seg.y1), proj(sht.seg.x2, sht.seg.y2));
  const double gap = std::max(0.0, std::max(b0 - lng.len, -b1));
  return gap <= max_gap ? gap : -1.0;
}

}  // namespace

double PixelSegment::length() const { return std::hypot(x2 - x1, y2 - y1); }

std::vector<PixelSegment> detect_segments_px(const GrayImage& image, const DetectionParams& params) {
  if (image.width < kMinDetectionSize || image.height < kMinDetectionSize) {
    throw ImageError("image below minimum detection size of " + std::to_string(kMinDetectionSize) + " px");
  }
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw ImageError("pixel buffer does not match image dimensions");
  }
  const Gradients grad = compute_gradients(smooth(image, params.smoothing_sigma));
  const int w = image.width, h = image.height;
  const double diagonal = std::hypot(w, h);
  const double min_len = params.min_length_fraction * diagonal;
  const double tol = deg_to_rad(params.angle_tolerance_deg);
  const float threshold = static_cast<float>(params.gradient_threshold);

  std::vector<int> seeds;
  for (int i = 0; i < static_cast<int>(grad.magnitude.size()); ++i) {
    if (grad.magnitude[i] > threshold) seeds.push_back(i);
  }
  std::stable_sort(seeds.begin(), seeds.end(),
                   [&](int a, int b) { return grad.magnitude[a] > grad.magnitude[b]; });

  std::vector<std::uint8_t> used(grad.magnitude.size(), 0);
  std::vector<Piece> pieces;
  std::vector<int> region;
  double region_angle = 0.0;
  auto grow = [&](int seed, double tolerance) {
    region.assign(1, seed);
    used[seed] = 1;
    double sum_cos = std::cos(grad.angle[seed]);
    double sum_sin = std::sin(grad.angle[seed]);
    region_angle = grad.angle[seed];
    for (std::size_t r = 0; r < region.size(); ++r) {
      const int px = region[r] % w, py = region[r] / w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = px + dx, ny = py + dy;
          if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w - 1 || ny >= h - 1) continue;
          const int ni = ny * w + nx;
          if (used[ni] || grad.magnitude[ni] <= threshold) continue;
          if (angle_diff(grad.angle[ni], region_angle) > tolerance) continue;
          used[ni] = 1;
          region.push_back(ni);
          sum_cos += std::cos(grad.angle[ni]);
          sum_sin += std::sin(grad.angle[ni]);
          region_angle = std::atan2(sum_sin, sum_cos);
        }
      }
    }
  };
  for (int seed : seeds) {
    if (used[seed]) continue;
    grow(seed, tol);
    if (region.size() < 5) continue;

    Piece piece;
    piece.points.reserve(region.size());
    for (int idx : region) {
      piece.points.push_back({static_cast<float>(idx % w + 0.5), static_cast<float>(idx / w + 0.5)});
    }
    const AxisFit fit = principal_axis(piece.points);
    // Elongated regions only, with the fitted axis along the level lines.
    if (std::sqrt(fit.lambda2) > params.max_aspect_ratio * std::sqrt(fit.lambda1)) continue;
    double level = region_angle;
    if (level < 0) level += kPi;
    if (level >= kPi) level -= kPi;
    fit_piece(piece, fit);
    double da = std::abs(level - piece.angle);
    da = std::min(da, kPi - da);
    if (da > tol) continue;
    if (piece.len < std::min(min_len, 4.0)) continue;
    pieces.push_back(std::move(piece));
  }

  const double max_angle = deg_to_rad(params.merge_angle_deg);
  // The floor covers the two edges of a thin (about 3 px) stroke.
  const double max_dist = std::max(4.5, params.merge_distance_fraction * diagonal);
  const double max_gap = std::max(max_dist, params.merge_gap_fraction * diagonal);
  std::stable_sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) { return a.len > b.len; });
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t i = 0; i < pieces.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < pieces.size(); ++j) {
        if (merge_gap(pieces[i], pieces[j], max_angle, max_dist, max_gap) < 0.0) continue;
        auto& target = pieces[i];
        target.points.insert(target.points.end(), pieces[j].points.begin(), pieces[j].points.end());
        fit_piece(target, principal_axis(target.points));
        pieces.erase(pieces.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
        break;
      }
    }
  }

  std::vector<PixelSegment> out;
  for (const auto& p : pieces) {
    if (p.len < min_len) continue;
    PixelSegment s = p.seg;
    s.x1 = std::clamp(s.x1, 0.0, w - 1.0);
    s.x2 = std::clamp(s.x2, 0.0, w - 1.0);
    s.y1 = std::clamp(s.y1, 0.0, h - 1.0);
    s.y2 = std::clamp(s.y2, 0.0, h - 1.0);
    if (s.length() >= min_len) out.push_back(s);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const PixelSegment& a, const PixelSegment& b) { return a.length() > b.length(); });
  return out;
}

std::vector<LineSegment> detect_segments(const GrayImage& image, const DetectionParams& params) {
  const ImageFrame frame(image.width, image.height);
  std::vector<LineSegment> out;
  for (const auto& s : detect_segments_px(image, params)) {
    out.push_back(LineSegment::from_endpoints(frame.to_normalized(s.x1, s.y1),
                                              frame.to_normalized(s.x2, s.y2)));
  }
  return out;
}

}  // namespace condforge
