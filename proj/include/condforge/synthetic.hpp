#pragma once

// Planted-scene generators. Ground truth comes from the known rotation and
// camera, never from the estimators under test.

#include <Eigen/Core>

#include <array>
#include <random>
#include <vector>

#include "condforge/geometry.hpp"
#include "condforge/image_io.hpp"

namespace condforge::synthetic {

struct SceneOptions {
  std::array<int, 3> segments_per_axis{12, 12, 12};
  double jitter_deg = 2.0;
  /// Fraction of the final segment list that is uniform-random outliers.
  double outlier_fraction = 0.25;
  double min_length = 0.08;
  CameraModel camera{};
  CanvasExtent extent{};
};

struct PlantedScene {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  CameraModel camera{};
  std::vector<LineSegment> segments;
  /// Planted axis per segment, -1 for outliers.
  std::vector<int> labels;
  std::array<HomogeneousPoint, 3> vps;
};

Eigen::Matrix3d random_rotation(std::mt19937_64& rng);

/// Rotation whose planted class is `target`, with every vanishing point well
/// away from the finite/infinite boundary at k_extent.
Eigen::Matrix3d rotation_for_class(PerspectiveClass target, std::mt19937_64& rng,
                                   double k_extent = 4.0, CanvasExtent extent = {},
                                   const CameraModel& camera = {});

/// Class implied by projecting the columns of `rotation`.
PerspectiveClass planted_class(const Eigen::Matrix3d& rotation, const CameraModel& camera,
                               double k_extent, CanvasExtent extent = {});

/// Per-axis segment counts for a scene with clear perspective structure: the
/// finite axis nearest the image center gets `dominant`, other finite axes
/// `secondary`, axes at infinity `minor`.
std::array<int, 3> strong_perspective_counts(const Eigen::Matrix3d& rotation,
                                             const CameraModel& camera, double k_extent = 4.0,
                                             CanvasExtent extent = {}, int dominant = 18,
                                             int secondary = 12, int minor = 6);

/// Wireframe segments along the three columns of `rotation`, plus outliers.
PlantedScene manhattan_scene(const Eigen::Matrix3d& rotation, const SceneOptions& options,
                             std::mt19937_64& rng);

/// Segments with uniform midpoints and orientations.
std::vector<LineSegment> random_segments(int count, std::mt19937_64& rng, CanvasExtent extent = {},
                                         double min_length = 0.05, double max_length = 0.5);

/// Draws normalized segments as strokes on a width x height canvas.
GrayImage render_segments(const std::vector<LineSegment>& segments, int width, int height,
                          int line_width, std::uint8_t foreground = 255,
                          std::uint8_t background = 0);

/// Blob texture plus per-pixel uniform noise; no straight structure.
GrayImage blob_texture(int width, int height, std::mt19937_64& rng, int blobs = 40,
                       double noise_amplitude = 24.0);

/// Angle in degrees between two directions, ignoring sign.
double axis_angle_deg(const Vec3& a, const Vec3& b);

/// Per-axis angular error after matching recovered directions to the
/// planted columns by the best permutation.
std::array<double, 3> matched_axis_errors_deg(const Eigen::Matrix3d& rotation,
                                              const std::array<Vec3, 3>& recovered);

}  // namespace condforge::synthetic
