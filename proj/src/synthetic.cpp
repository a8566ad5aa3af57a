#include "condforge/synthetic.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>

#include "condforge/raster.hpp"

namespace condforge::synthetic {
namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Ratio of a direction's image position to the k_extent box (infinite for
/// directions parallel to the image plane).
double extent_ratio(const Vec3& d, const CameraModel& camera, double k_extent, CanvasExtent extent) {
  const auto vp = project(d, camera);
  const auto p = vp.euclidean();
  if (!p) return std::numeric_limits<double>::infinity();
  return std::max(std::abs(p->x) / (k_extent * extent.half_width),
                  std::abs(p->y) / (k_extent * extent.half_height));
}

Eigen::Matrix3d euler(double roll_deg, double yaw_deg, double pitch_deg) {
  using Eigen::AngleAxisd;
  return (AngleAxisd(deg_to_rad(roll_deg), Vec3::UnitZ()) *
          AngleAxisd(deg_to_rad(yaw_deg), Vec3::UnitY()) *
          AngleAxisd(deg_to_rad(pitch_deg), Vec3::UnitX()))
      .toRotationMatrix();
}

double signed_range(std::mt19937_64& rng, double lo, double hi) {
  const double v = uniform(rng, lo, hi);
  return std::bernoulli_distribution(0.5)(rng) ? v : -v;
}

std::optional<LineSegment> clip_to_canvas(NormalizedPoint a, NormalizedPoint b, CanvasExtent extent) {
  const std::array<double, 2> d{b.x - a.x, b.y - a.y};
  const auto t = clip_parametric({a.x, a.y}, d, 0.0, 1.0, extent.half_width, extent.half_height);
  if (!t) return std::nullopt;
  const NormalizedPoint p{a.x + (*t)[0] * d[0], a.y + (*t)[0] * d[1]};
  const NormalizedPoint q{a.x + (*t)[1] * d[0], a.y + (*t)[1] * d[1]};
  if (p == q) return std::nullopt;
  return LineSegment::from_endpoints(p, q);
}

LineSegment rotate_about_midpoint(const LineSegment& s, double angle) {
  const auto m = s.midpoint();
  const double c = std::cos(angle), sn = std::sin(angle);
  auto rot = [&](NormalizedPoint p) {
    const double x = p.x - m.x, y = p.y - m.y;
    return NormalizedPoint{m.x + c * x - sn * y, m.y + sn * x + c * y};
  };
  return LineSegment::from_endpoints(rot(s.p1), rot(s.p2));
}

}  // namespace

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

PerspectiveClass planted_class(const Eigen::Matrix3d& rotation, const CameraModel& camera,
                               double k_extent, CanvasExtent extent) {
  int finite = 0;
  for (int k = 0; k < 3; ++k) {
    finite += is_finite_vp(project(rotation.col(k), camera), k_extent, extent) ? 1 : 0;
  }
  return static_cast<PerspectiveClass>(finite);
}

Eigen::Matrix3d rotation_for_class(PerspectiveClass target, std::mt19937_64& rng, double k_extent,
                                   CanvasExtent extent, const CameraModel& camera) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double roll = uniform(rng, -12.0, 12.0);
    double yaw = 0.0, pitch = 0.0;
    switch (target) {
      case PerspectiveClass::OnePoint:
        yaw = uniform(rng, -8.0, 8.0);
        pitch = uniform(rng, -8.0, 8.0);
        break;
      case PerspectiveClass::TwoPoint:
        yaw = signed_range(rng, 28.0, 62.0);
        pitch = uniform(rng, -4.0, 4.0);
        break;
      case PerspectiveClass::ThreePoint:
        yaw = signed_range(rng, 30.0, 60.0);
        pitch = signed_range(rng, 28.0, 42.0);
        break;
      case PerspectiveClass::None:
        yaw = uniform(rng, -180.0, 180.0);
        pitch = uniform(rng, -90.0, 90.0);
        break;
    }
    const Eigen::Matrix3d r = euler(roll, yaw, pitch);
    if (planted_class(r, camera, k_extent, extent) != target) continue;
    bool clear = true;
    for (int k = 0; k < 3; ++k) {
      const double ratio = extent_ratio(r.col(k), camera, k_extent, extent);
      if (ratio > 0.7 && ratio < 1.5) clear = false;
    }
    if (clear) return r;
  }
  return euler(0.0, 0.0, 0.0);
}

std::array<int, 3> strong_perspective_counts(const Eigen::Matrix3d& rotation,
                                             const CameraModel& camera, double k_extent,
                                             CanvasExtent extent, int dominant, int secondary,
                                             int minor) {
  std::array<int, 3> counts{minor, minor, minor};
  int nearest = -1;
  double nearest_dist = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const auto vp = project(rotation.col(k), camera);
    if (!is_finite_vp(vp, k_extent, extent)) continue;
    counts[k] = secondary;
    const auto p = *vp.euclidean();
    const double dist = std::hypot(p.x, p.y);
    if (dist < nearest_dist) {
      nearest_dist = dist;
      nearest = k;
    }
  }
  if (nearest >= 0) counts[nearest] = dominant;
  return counts;
}

PlantedScene manhattan_scene(const Eigen::Matrix3d& rotation, const SceneOptions& options,
                             std::mt19937_64& rng) {
  PlantedScene scene;
  scene.rotation = rotation;
  scene.camera = options.camera;
  for (int k = 0; k < 3; ++k) scene.vps[k] = project(rotation.col(k), options.camera);

  const auto& cam = options.camera;
  auto to_image = [&](const Vec3& p) {
    return NormalizedPoint{cam.focal * p.x() / p.z() + cam.principal_point.x,
                           cam.focal * p.y() / p.z() + cam.principal_point.y};
  };

  const double jitter = deg_to_rad(options.jitter_deg);
  int inliers = 0;
  for (int k = 0; k < 3; ++k) {
    const Vec3 dir = rotation.col(k);
    int made = 0;
    for (int attempt = 0; made < options.segments_per_axis[k] && attempt < 5000; ++attempt) {
      const Vec3 center(uniform(rng, -2.5, 2.5), uniform(rng, -2.5, 2.5), uniform(rng, 2.0, 6.0));
      const double half = uniform(rng, 0.6, 2.0);
      const Vec3 a = center - half * dir;
      const Vec3 b = center + half * dir;
      if (a.z() < 0.3 || b.z() < 0.3) continue;
      auto seg = clip_to_canvas(to_image(a), to_image(b), options.extent);
      if (!seg || seg->length < options.min_length) continue;
      LineSegment s = *seg;
      if (jitter > 0.0) s = rotate_about_midpoint(s, uniform(rng, -jitter, jitter));
      scene.segments.push_back(s);
      scene.labels.push_back(k);
      ++made;
    }
    inliers += made;
  }

  if (options.outlier_fraction > 0.0) {
    const int outliers = static_cast<int>(
        std::lround(options.outlier_fraction / (1.0 - options.outlier_fraction) * inliers));
    for (auto& s : random_segments(outliers, rng, options.extent, options.min_length, 0.5)) {
      scene.segments.push_back(s);
      scene.labels.push_back(-1);
    }
  }
  return scene;
}

std::vector<LineSegment> random_segments(int count, std::mt19937_64& rng, CanvasExtent extent,
                                         double min_length, double max_length) {
  std::vector<LineSegment> out;
  while (static_cast<int>(out.size()) < count) {
    const NormalizedPoint m{uniform(rng, -extent.half_width, extent.half_width),
                            uniform(rng, -extent.half_height, extent.half_height)};
    const double angle = uniform(rng, 0.0, kPi);
    const double half = uniform(rng, min_length, max_length) / 2.0;
    const NormalizedPoint a{m.x - half * std::cos(angle), m.y - half * std::sin(angle)};
    const NormalizedPoint b{m.x + half * std::cos(angle), m.y + half * std::sin(angle)};
    auto s = clip_to_canvas(a, b, extent);
    if (s && s->length >= min_length) out.push_back(*s);
  }
  return out;
}

GrayImage render_segments(const std::vector<LineSegment>& segments, int width, int height,
                          int line_width, std::uint8_t foreground, std::uint8_t background) {
  GrayImage image(width, height, background);
  const ImageFrame frame(width, height);
  for (const auto& s : segments) {
    const double k = frame.scale();
    draw_stroke(image, HalfPoint{snap_half(s.p1.x * k), snap_half(s.p1.y * k)},
                HalfPoint{snap_half(s.p2.x * k), snap_half(s.p2.y * k)}, line_width, foreground);
  }
  return image;
}

GrayImage blob_texture(int width, int height, std::mt19937_64& rng, int blobs,
                       double noise_amplitude) {
  std::vector<double> acc(static_cast<std::size_t>(width) * height, 0.0);
  const double scale = std::max(width, height);
  for (int b = 0; b < blobs; ++b) {
    const double cx = uniform(rng, 0.0, width), cy = uniform(rng, 0.0, height);
    const double sigma = uniform(rng, 0.03, 0.12) * scale;
    const double amp = uniform(rng, -120.0, 120.0);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        acc[static_cast<std::size_t>(y) * width + x] += amp * std::exp(-d2 * inv);
      }
  }
  GrayImage image(width, height);
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double noise = noise_amplitude > 0.0 ? uniform(rng, -noise_amplitude, noise_amplitude) : 0.0;
    image.pixels[i] = static_cast<std::uint8_t>(std::clamp(128.0 + acc[i] + noise, 0.0, 255.0));
  }
  return image;
}

double axis_angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::min(1.0, std::abs(a.normalized().dot(b.normalized())));
  return rad_to_deg(std::acos(c));
}

std::array<double, 3> matched_axis_errors_deg(const Eigen::Matrix3d& rotation,
                                              const std::array<Vec3, 3>& recovered) {
  std::array<int, 3> perm{0, 1, 2};
  std::array<double, 3> best{};
  double best_total = std::numeric_limits<double>::infinity();
  do {
    std::array<double, 3> errs;
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
      errs[k] = axis_angle_deg(rotation.col(k), recovered[perm[k]]);
      total += errs[k];
    }
    if (total < best_total) {
      best_total = total;
      best = errs;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace condforge::synthetic
