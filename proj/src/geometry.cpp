#include "condforge/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "condforge/error.hpp"

namespace condforge {
namespace {

// Points closer than this (in homogeneous units) to a segment midpoint are
// treated as lying on the segment.
constexpr double kCoincident = 1e-12;
// |w| below this after normalization is snapped to an exact point at infinity.
constexpr double kParallelSnap = 1e-12;

/// Divides by the norm unless already unit length, so repeated normalization
/// is bit-stable.
Vec3 unit(Vec3 v) {
  const double n = v.norm();
  if (std::abs(n - 1.0) > 1e-14) v /= n;
  return v;
}

Vec3 canonical_sign(Vec3 v) {
  for (int i = 0; i < 3; ++i) {
    if (v[i] != 0.0) {
      if (v[i] < 0.0) v = -v;
      break;
    }
  }
  return v;
}

/// Residual of a segment (given by midpoint and unit direction) w.r.t. v.
double residual_to(double mx, double my, double ux, double uy, const Vec3& v) {
  const double dx = v.x() - v.z() * mx;
  const double dy = v.y() - v.z() * my;
  if (std::hypot(dx, dy) <= kCoincident) return 0.0;
  const double cross = std::abs(dx * uy - dy * ux);
  const double dot = std::abs(dx * ux + dy * uy);
  return std::atan2(cross, dot);
}

struct SegmentCache {
  std::vector<Vec3> lines;
  std::vector<double> mx, my, ux, uy, length;

  explicit SegmentCache(std::span<const LineSegment> segments) {
    const std::size_t n = segments.size();
    lines.reserve(n);
    mx.resize(n);
    my.resize(n);
    ux.resize(n);
    uy.resize(n);
    length.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = segments[i];
      lines.push_back(segment_to_line(s));
      const auto m = s.midpoint();
      mx[i] = m.x;
      my[i] = m.y;
      const double dx = s.p2.x - s.p1.x;
      const double dy = s.p2.y - s.p1.y;
      const double len = std::hypot(dx, dy);
      ux[i] = dx / len;
      uy[i] = dy / len;
      length[i] = s.length;
    }
  }

  double residual(std::size_t i, const Vec3& v) const {
    return residual_to(mx[i], my[i], ux[i], uy[i], v);
  }
};

std::optional<HomogeneousPoint> try_intersect(const Vec3& l1, const Vec3& l2) {
  Vec3 c = l1.cross(l2);
  const double n = c.norm();
  if (!(n > 1e-12 * l1.norm() * l2.norm())) return std::nullopt;
  c /= n;
  if (std::abs(c.z()) <= kParallelSnap) c.z() = 0.0;
  return HomogeneousPoint::from(c);
}

/// Spatial hash over unit vectors (both signs inserted) for near-duplicate
/// direction lookup.
class DirectionIndex {
 public:
  explicit DirectionIndex(double cell) : cell_(cell) {}

  bool has_within(const Vec3& d, double max_angle) const {
    const auto base = cell_of(d);
    const double min_dot = std::cos(max_angle);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find(key(base[0] + dx, base[1] + dy, base[2] + dz));
          if (it == cells_.end()) continue;
          for (const auto& k : it->second) {
            if (std::abs(k.dot(d)) > min_dot) return true;
          }
        }
    return false;
  }

  void insert(const Vec3& d) {
    for (const Vec3& s : {d, Vec3(-d)}) {
      const auto c = cell_of(s);
      cells_[key(c[0], c[1], c[2])].push_back(s);
    }
  }

 private:
  std::array<long, 3> cell_of(const Vec3& d) const {
    return {static_cast<long>(std::floor(d.x() / cell_)), static_cast<long>(std::floor(d.y() / cell_)),
            static_cast<long>(std::floor(d.z() / cell_))};
  }
  static long long key(long x, long y, long z) {
    return ((static_cast<long long>(x) + 4096) << 26) | ((static_cast<long long>(y) + 4096) << 13) |
           (static_cast<long long>(z) + 4096);
  }

  double cell_;
  std::unordered_map<long long, std::vector<Vec3>> cells_;
};

ManhattanFrame score_frame(const std::array<Vec3, 3>& dirs, const SegmentCache& cache,
                           const VpParams& params) {
  const double tau = deg_to_rad(params.tau_support_deg);
  ManhattanFrame frame;
  std::array<double, 3> residual_sums{};
  for (int k = 0; k < 3; ++k) {
    frame.axes[k].direction = dirs[k];
    frame.axes[k].vp = project(dirs[k], params.camera);
  }
  double total_residual = 0.0;
  int assigned = 0;
  for (std::size_t i = 0; i < cache.lines.size(); ++i) {
    int best = -1;
    double best_r = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double r = cache.residual(i, frame.axes[k].vp.vec());
      if (r <= tau && (best < 0 || r < best_r)) {
        best = k;
        best_r = r;
      }
    }
    if (best < 0) continue;
    auto& axis = frame.axes[best];
    axis.member_ids.push_back(static_cast<int>(i));
    axis.support_length += cache.length[i];
    residual_sums[best] += best_r;
    total_residual += best_r;
    ++assigned;
  }
  for (int k = 0; k < 3; ++k) {
    auto& axis = frame.axes[k];
    axis.support_count = static_cast<int>(axis.member_ids.size());
    axis.mean_residual = axis.support_count ? residual_sums[k] / axis.support_count : 0.0;
    frame.score += axis.support_length;
  }
  frame.mean_residual = assigned ? total_residual / assigned : 0.0;
  return frame;
}

std::pair<Vec3, Vec3> orthonormalize_pair(const Vec3& a, Vec3 b) {
  if (a.dot(b) < 0.0) b = -b;
  const Vec3 e = (a + b).normalized();
  const Vec3 f = (a - b).normalized();
  return {(e + f) / std::sqrt(2.0), (e - f) / std::sqrt(2.0)};
}

std::array<Vec3, 3> nearest_rotation(const std::array<Vec3, 3>& dirs) {
  Eigen::Matrix3d m;
  for (int k = 0; k < 3; ++k) m.col(k) = dirs[k];
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d q = svd.matrixU() * svd.matrixV().transpose();
  return {canonical_sign(q.col(0)), canonical_sign(q.col(1)), canonical_sign(q.col(2))};
}

/// Least-squares direction orthogonal to the interpretation planes of the
/// member segments, weighted by length.
Vec3 fit_direction(const ManhattanAxis& axis, const SegmentCache& cache, const CameraModel& cam) {
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (int id : axis.member_ids) {
    const Vec3& l = cache.lines[static_cast<std::size_t>(id)];
    Vec3 n(cam.focal * l.x(), cam.focal * l.y(),
           cam.principal_point.x * l.x() + cam.principal_point.y * l.y() + l.z());
    n.normalize();
    scatter += cache.length[static_cast<std::size_t>(id)] * n * n.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  Vec3 d = eig.eigenvectors().col(0);
  if (d.dot(axis.direction) < 0.0) d = -d;
  return d;
}

ManhattanFrame refine_frame(ManhattanFrame frame, const SegmentCache& cache, const VpParams& params) {
  for (int iter = 0; iter < 3; ++iter) {
    std::array<Vec3, 3> dirs;
    bool changed = false;
    for (int k = 0; k < 3; ++k) {
      const auto& axis = frame.axes[k];
      if (axis.support_count >= 2) {
        dirs[k] = fit_direction(axis, cache, params.camera);
        changed = true;
      } else {
        dirs[k] = axis.direction;
      }
    }
    if (!changed) break;
    auto candidate = score_frame(nearest_rotation(dirs), cache, params);
    if (candidate.score < frame.score) break;
    candidate.hypothesis_a = frame.hypothesis_a;
    candidate.hypothesis_b = frame.hypothesis_b;
    frame = std::move(candidate);
  }
  return frame;
}

}  // namespace

ImageFrame::ImageFrame(int width, int height)
    : width_(width), height_(height), scale_(std::max(width, height) / 2.0) {
  if (width <= 0 || height <= 0) throw GeometryError("image frame needs positive dimensions");
}

CanvasExtent ImageFrame::extent() const {
  return {width_ / (2.0 * scale_), height_ / (2.0 * scale_)};
}

NormalizedPoint ImageFrame::to_normalized(double px, double py) const {
  return {(px - (width_ - 1) / 2.0) / scale_, (py - (height_ - 1) / 2.0) / scale_};
}

std::array<double, 2> ImageFrame::to_pixel(NormalizedPoint p) const {
  return {p.x * scale_ + (width_ - 1) / 2.0, p.y * scale_ + (height_ - 1) / 2.0};
}

HomogeneousPoint HomogeneousPoint::from(double x, double y, double w) {
  Vec3 v(x, y, w);
  if (!v.allFinite()) throw GeometryError("homogeneous point has non-finite components");
  if (v.norm() == 0.0) throw GeometryError("homogeneous point (0,0,0) is undefined");
  return HomogeneousPoint(canonical_sign(unit(v)));
}

std::optional<NormalizedPoint> HomogeneousPoint::euclidean() const {
  if (is_at_infinity()) return std::nullopt;
  return NormalizedPoint{v_.x() / v_.z(), v_.y() / v_.z()};
}

LineSegment LineSegment::from_endpoints(NormalizedPoint p1, NormalizedPoint p2) {
  const double dx = p2.x - p1.x;
  const double dy = p2.y - p1.y;
  const double length = std::hypot(dx, dy);
  if (!(length > 0.0)) throw GeometryError("degenerate segment: endpoints coincide");
  double angle = std::atan2(dy, dx);
  if (angle < 0.0) angle += kPi;
  if (angle >= kPi) angle -= kPi;
  return {p1, p2, length, angle};
}

std::string_view to_string(PerspectiveClass c) {
  switch (c) {
    case PerspectiveClass::None:
      return "None";
    case PerspectiveClass::OnePoint:
      return "OnePoint";
    case PerspectiveClass::TwoPoint:
      return "TwoPoint";
    case PerspectiveClass::ThreePoint:
      return "ThreePoint";
  }
  return "None";
}

PerspectiveClass perspective_class_from_string(std::string_view name) {
  for (auto c : {PerspectiveClass::None, PerspectiveClass::OnePoint, PerspectiveClass::TwoPoint,
                 PerspectiveClass::ThreePoint}) {
    if (to_string(c) == name) return c;
  }
  throw Error("unknown perspective class '" + std::string(name) + "'");
}

Vec3 segment_to_line(const LineSegment& s) {
  const Vec3 a(s.p1.x, s.p1.y, 1.0);
  const Vec3 b(s.p2.x, s.p2.y, 1.0);
  const Vec3 l = a.cross(b);
  if (s.p1 == s.p2 || !(l.head<2>().norm() > 0.0)) {
    throw GeometryError("degenerate segment: endpoints coincide");
  }
  return l.normalized();
}

HomogeneousPoint intersect_lines(const Vec3& l1, const Vec3& l2) {
  if (l1.norm() == 0.0 || l2.norm() == 0.0) throw GeometryError("zero line vector");
  auto p = try_intersect(l1, l2);
  if (!p) throw GeometryError("lines coincide: no unique intersection");
  return *p;
}

Consistency consistency(const LineSegment& s, const HomogeneousPoint& v, double tau) {
  if (!(tau > 0.0 && tau < kPi / 2.0)) throw GeometryError("tau must lie in (0, pi/2)");
  const auto m = s.midpoint();
  const double ux = (s.p2.x - s.p1.x) / s.length;
  const double uy = (s.p2.y - s.p1.y) / s.length;
  const double r = residual_to(m.x, m.y, ux, uy, v.vec());
  return {r <= tau, r};
}

std::vector<VpHypothesis> hypothesize_vps(std::span<const LineSegment> segments,
                                          const VpParams& params) {
  if (segments.size() < 2) throw GeometryError("hypothesize_vps needs at least 2 segments");
  const SegmentCache cache(segments);
  const std::size_t n = segments.size();

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return segments[a].length > segments[b].length; });
  order.resize(std::min<std::size_t>(n, static_cast<std::size_t>(std::max(params.max_segments, 2))));

  const double tau = deg_to_rad(params.tau_support_deg);
  std::vector<VpHypothesis> candidates;
  candidates.reserve(order.size() * (order.size() - 1) / 2);
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const auto point = try_intersect(cache.lines[order[a]], cache.lines[order[b]]);
      if (!point) continue;
      VpHypothesis h;
      h.point = *point;
      h.source_a = order[a];
      h.source_b = order[b];
      h.candidate_index = static_cast<int>(candidates.size());
      double residual_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = cache.residual(i, point->vec());
        if (r > tau) continue;
        h.member_ids.push_back(static_cast<int>(i));
        h.support_length += cache.length[i];
        residual_sum += r;
      }
      h.support_count = static_cast<int>(h.member_ids.size());
      h.mean_residual = h.support_count ? residual_sum / h.support_count : 0.0;
      candidates.push_back(std::move(h));
    }
  }

  std::sort(candidates.begin(), candidates.end(), [](const VpHypothesis& a, const VpHypothesis& b) {
    if (a.support_length != b.support_length) return a.support_length > b.support_length;
    if (a.mean_residual != b.mean_residual) return a.mean_residual < b.mean_residual;
    return a.candidate_index < b.candidate_index;
  });

  const double dedup = deg_to_rad(params.dedup_angle_deg);
  DirectionIndex kept_index(std::max(dedup, 1e-6));
  std::vector<VpHypothesis> kept;
  for (auto& h : candidates) {
    const Vec3 d = backproject(h.point, params.camera);
    if (kept_index.has_within(d, dedup)) continue;
    kept_index.insert(d);
    kept.push_back(std::move(h));
  }
  return kept;
}

Vec3 backproject(const HomogeneousPoint& v, const CameraModel& cam) {
  if (!(cam.focal > 0.0)) throw GeometryError("camera focal must be positive");
  const Vec3 d(v.x() - cam.principal_point.x * v.w(), v.y() - cam.principal_point.y * v.w(),
               cam.focal * v.w());
  return canonical_sign(d.normalized());
}

HomogeneousPoint project(const Vec3& direction, const CameraModel& cam) {
  const Vec3 v(cam.focal * direction.x() + cam.principal_point.x * direction.z(),
               cam.focal * direction.y() + cam.principal_point.y * direction.z(), direction.z());
  return HomogeneousPoint::from(v);
}

std::optional<ManhattanFrame> complete_manhattan(std::span<const VpHypothesis> hyps,
                                                 std::span<const LineSegment> segments,
                                                 const VpParams& params) {
  if (hyps.empty()) return std::nullopt;
  const SegmentCache cache(segments);
  const std::size_t k = std::min<std::size_t>(hyps.size(), static_cast<std::size_t>(params.top_k));
  std::vector<Vec3> dirs;
  dirs.reserve(k);
  for (std::size_t i = 0; i < k; ++i) dirs.push_back(backproject(hyps[i].point, params.camera));

  const double max_dot = std::sin(deg_to_rad(params.tol_ortho_deg));
  std::optional<ManhattanFrame> best;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (std::abs(dirs[i].dot(dirs[j])) > max_dot) continue;
      auto [a, b] = orthonormalize_pair(dirs[i], dirs[j]);
      const Vec3 c = a.cross(b).normalized();
      auto frame = score_frame({canonical_sign(a), canonical_sign(b), canonical_sign(c)}, cache, params);
      frame.hypothesis_a = static_cast<int>(i);
      frame.hypothesis_b = static_cast<int>(j);
      if (!best || frame.score > best->score ||
          (frame.score == best->score && frame.mean_residual < best->mean_residual)) {
        best = std::move(frame);
      }
    }
  }
  if (best && params.refine) best = refine_frame(std::move(*best), cache, params);
  return best;
}

bool is_finite_vp(const HomogeneousPoint& v, double k_extent, CanvasExtent extent) {
  const auto p = v.euclidean();
  if (!p) return false;
  return std::abs(p->x) <= k_extent * extent.half_width &&
         std::abs(p->y) <= k_extent * extent.half_height;
}

PerspectiveClass classify(const ManhattanFrame& frame, double k_extent, CanvasExtent extent) {
  int finite = 0;
  for (const auto& axis : frame.axes) finite += is_finite_vp(axis.vp, k_extent, extent) ? 1 : 0;
  return static_cast<PerspectiveClass>(finite);
}

FilterResult strong_perspective_filter(const std::optional<ManhattanFrame>& frame,
                                       std::span<const LineSegment> segments,
                                       const FilterThresholds& thresholds, CanvasExtent extent) {
  FilterResult result;
  if (!frame) return result;
  const auto cls = classify(*frame, thresholds.k_extent, extent);
  if (cls == PerspectiveClass::None) return result;
  double total_length = 0.0;
  for (const auto& s : segments) total_length += s.length;
  for (int k = 0; k < 3; ++k) {
    const auto& axis = frame->axes[k];
    if (!is_finite_vp(axis.vp, thresholds.k_extent, extent)) continue;
    if (result.dominant_axis < 0 ||
        axis.support_length > frame->axes[result.dominant_axis].support_length) {
      result.dominant_axis = k;
    }
  }
  const auto& dominant = frame->axes[result.dominant_axis];
  result.pass = dominant.support_count >= thresholds.min_support_count &&
                dominant.support_length >= thresholds.min_support_fraction * total_length;
  if (result.pass) result.perspective = cls;
  return result;
}

VpAnalysis analyze_segments(std::span<const LineSegment> segments, const VpParams& params,
                            const FilterThresholds& thresholds, CanvasExtent extent) {
  VpAnalysis out;
  if (segments.size() < 2) return out;
  out.hypotheses = hypothesize_vps(segments, params);
  out.frame = complete_manhattan(out.hypotheses, segments, params);
  if (out.frame) out.raw_class = classify(*out.frame, thresholds.k_extent, extent);
  out.filter = strong_perspective_filter(out.frame, segments, thresholds, extent);
  return out;
}

}  // namespace condforge
