#pragma once

// Projective-geometry core: vanishing-point hypotheses from segment pairs,
// Manhattan frame completion, perspective classification and the
// strong-perspective corpus filter.
//
// Image coordinates are "normalized": the image center is the origin and the
// longer image side spans [-1, 1]. All functions here are pure.

#include <Eigen/Core>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace condforge {

using Vec3 = Eigen::Vector3d;

constexpr double kPi = 3.14159265358979323846;
constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

struct NormalizedPoint {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const NormalizedPoint&) const = default;
};

/// Canvas bounds in normalized units: half_width = W / max(W, H), etc.
struct CanvasExtent {
  double half_width = 1.0;
  double half_height = 1.0;

  bool operator==(const CanvasExtent&) const = default;
};

/// Maps pixel-center coordinates of a W x H image to normalized coordinates.
/// Pixel (i, j) has its center at (i, j); the image center is ((W-1)/2, (H-1)/2).
class ImageFrame {
 public:
  ImageFrame(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  /// Pixels per normalized unit (half the longer side).
  double scale() const { return scale_; }
  CanvasExtent extent() const;

  NormalizedPoint to_normalized(double px, double py) const;
  std::array<double, 2> to_pixel(NormalizedPoint p) const;

 private:
  int width_;
  int height_;
  double scale_;
};

/// Projective point, stored unit-length with the first non-zero component
/// positive. w == 0 is a point at infinity (a pure direction).
class HomogeneousPoint {
 public:
  /// The origin (0, 0, 1).
  HomogeneousPoint() : v_(0.0, 0.0, 1.0) {}

  /// Throws GeometryError for the zero vector or non-finite input.
  static HomogeneousPoint from(double x, double y, double w);
  static HomogeneousPoint from(const Vec3& v) { return from(v.x(), v.y(), v.z()); }
  static HomogeneousPoint finite(NormalizedPoint p) { return from(p.x, p.y, 1.0); }
  static HomogeneousPoint at_infinity(double dx, double dy) { return from(dx, dy, 0.0); }

  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double w() const { return v_.z(); }
  const Vec3& vec() const { return v_; }

  bool is_at_infinity() const { return v_.z() == 0.0; }
  /// Euclidean position; empty for points at infinity.
  std::optional<NormalizedPoint> euclidean() const;

  bool operator==(const HomogeneousPoint&) const = default;

 private:
  explicit HomogeneousPoint(const Vec3& v) : v_(v) {}
  Vec3 v_;
};

/// Image line segment in normalized coordinates.
struct LineSegment {
  NormalizedPoint p1;
  NormalizedPoint p2;
  double length = 0.0;
  /// Orientation of p2 - p1 folded into [0, pi).
  double direction_angle = 0.0;

  /// Throws GeometryError when p1 == p2.
  static LineSegment from_endpoints(NormalizedPoint p1, NormalizedPoint p2);

  NormalizedPoint midpoint() const { return {(p1.x + p2.x) / 2.0, (p1.y + p2.y) / 2.0}; }
};

struct CameraModel {
  double focal = 1.0;
  NormalizedPoint principal_point{};
};

struct VpHypothesis {
  HomogeneousPoint point;
  int support_count = 0;
  double support_length = 0.0;
  /// Indices into the input segment list, ascending.
  std::vector<int> member_ids;
  double mean_residual = 0.0;
  /// Generating pair (input indices) and candidate order, for tie-breaks.
  int source_a = -1;
  int source_b = -1;
  int candidate_index = -1;
};

struct ManhattanAxis {
  Vec3 direction = Vec3::UnitZ();
  HomogeneousPoint vp;
  int support_count = 0;
  double support_length = 0.0;
  std::vector<int> member_ids;
  double mean_residual = 0.0;
};

struct ManhattanFrame {
  std::array<ManhattanAxis, 3> axes;
  /// Sum of axis support lengths; each segment is counted at most once.
  double score = 0.0;
  double mean_residual = 0.0;
  /// Hypotheses (indices into the completion input) the frame grew from.
  int hypothesis_a = -1;
  int hypothesis_b = -1;

  Vec3 direction(int axis) const { return axes[axis].direction; }
  const HomogeneousPoint& vp(int axis) const { return axes[axis].vp; }
};

enum class PerspectiveClass { None, OnePoint, TwoPoint, ThreePoint };

std::string_view to_string(PerspectiveClass c);
/// Inverse of to_string; throws Error on unknown names.
PerspectiveClass perspective_class_from_string(std::string_view name);

struct VpParams {
  double tau_support_deg = 2.0;
  double dedup_angle_deg = 2.0;
  double tol_ortho_deg = 5.0;
  int max_segments = 200;
  int top_k = 30;
  /// Least-squares re-fit of each axis direction to its members after
  /// the best frame is chosen.
  bool refine = true;
  CameraModel camera{};
};

struct FilterThresholds {
  int min_support_count = 8;
  double min_support_fraction = 0.25;
  double k_extent = 4.0;
};

/// Homogeneous line through both endpoints, unit-normalized.
Vec3 segment_to_line(const LineSegment& s);

/// Intersection of two homogeneous lines. w is exactly 0 for parallel lines.
/// Throws GeometryError when the lines coincide.
HomogeneousPoint intersect_lines(const Vec3& l1, const Vec3& l2);

struct Consistency {
  bool consistent = false;
  /// Angle in [0, pi/2] between the segment and the ray from its midpoint
  /// toward the vanishing point.
  double residual = 0.0;
};

/// tau in radians.
Consistency consistency(const LineSegment& s, const HomogeneousPoint& v, double tau);

/// Exhaustive 2-line search over the max_segments longest segments; support
/// is scored over all segments. Throws GeometryError for fewer than 2.
std::vector<VpHypothesis> hypothesize_vps(std::span<const LineSegment> segments,
                                          const VpParams& params = {});

/// Unit ray direction of an image point, sign-canonicalized.
Vec3 backproject(const HomogeneousPoint& v, const CameraModel& cam);

/// Image of a 3D direction (inverse of backproject up to sign).
HomogeneousPoint project(const Vec3& direction, const CameraModel& cam);

/// Completes an orthogonal triple from the top-K hypotheses. Returns nullopt
/// when no pair is orthogonal within tolerance.
std::optional<ManhattanFrame> complete_manhattan(std::span<const VpHypothesis> hyps,
                                                 std::span<const LineSegment> segments,
                                                 const VpParams& params = {});

bool is_finite_vp(const HomogeneousPoint& v, double k_extent, CanvasExtent extent = {});

PerspectiveClass classify(const ManhattanFrame& frame, double k_extent, CanvasExtent extent = {});

struct FilterResult {
  bool pass = false;
  /// None whenever pass is false.
  PerspectiveClass perspective = PerspectiveClass::None;
  int dominant_axis = -1;
};

FilterResult strong_perspective_filter(const std::optional<ManhattanFrame>& frame,
                                       std::span<const LineSegment> segments,
                                       const FilterThresholds& thresholds = {},
                                       CanvasExtent extent = {});

/// hypothesize -> complete -> filter, tolerating degenerate input (< 2
/// segments yields no frame and a failed filter).
struct VpAnalysis {
  std::vector<VpHypothesis> hypotheses;
  std::optional<ManhattanFrame> frame;
  FilterResult filter;
  /// Class of the frame regardless of the filter outcome.
  PerspectiveClass raw_class = PerspectiveClass::None;
};

VpAnalysis analyze_segments(std::span<const LineSegment> segments, const VpParams& params = {},
                            const FilterThresholds& thresholds = {}, CanvasExtent extent = {});

}  // namespace condforge
