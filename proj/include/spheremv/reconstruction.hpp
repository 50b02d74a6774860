#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "spheremv/camera.hpp"
#include "spheremv/projection.hpp"

namespace spheremv {

struct CenterObservation {
  const CameraView* view = nullptr;
  Eigen::Vector2d pixel;
};

// Homogeneous linear (DLT) triangulation over all views. Rows are built in
// normalized image coordinates and scaled to unit norm. Throws
// DegenerateGeometry for fewer than two views, coincident camera centers, a
// rank-deficient design matrix or a solution at infinity.
Eigen::Vector3d triangulate_center(std::span<const CenterObservation> observations);

// Average of the pairwise midpoints of closest approach between viewing rays.
// Diagnostic only; triangulate_center() is authoritative.
Eigen::Vector3d triangulate_midpoint(std::span<const CenterObservation> observations);

// RMS pixel distance between each observation and the projection of `point`.
double reprojection_rms(const Eigen::Vector3d& point,
                        std::span<const CenterObservation> observations);

struct ViewRadius {
  std::string image_id;
  double radius = 0.0;

  bool operator==(const ViewRadius&) const = default;
};

struct SphereModel {
  Sphere sphere;  // world frame
  std::vector<ViewRadius> per_view_radii;
  double radius_spread = 0.0;           // max |R_i - R_W|
  double triangulation_residual = 0.0;  // pixels, RMS
  std::optional<double> scale_applied;
};

struct MatchedObservation {
  const CameraView* view = nullptr;
  const EllipseObservation* ellipse = nullptr;
};

// Sphere from n >= 2 views of one physical sphere: eccentricity-corrected
// centers are triangulated, moved into each camera frame, turned into
// per-view radii from depth and b_e, and averaged (weighted when `weights` is
// given). Throws DegenerateGeometry from triangulation and DegenerateProjection
// when the center lands behind a camera.
SphereModel reconstruct_sphere(std::span<const MatchedObservation> matched,
                               std::span<const double> weights = {});

// Least-squares radius from per-view estimates: plain or weighted mean.
double estimate_radius_ls(std::span<const double> radii, std::span<const double> weights = {});

struct ScaleResult {
  double s_r = 1.0;
  double residual_rmse = 0.0;  // RMSE of R_real - s_r * R_estimated
};

struct ScaleAnchor {
  double real_radius = 0.0;
  double estimated_radius = 0.0;
};

// One anchor: R_real / R_est. Several: sqrt(sum R_real^2 / sum R_est^2).
ScaleResult metric_scale(std::span<const ScaleAnchor> anchors);

Sphere apply_scale(const Sphere& sphere, double s_r);
SphereModel apply_scale(const SphereModel& model, double s_r);

// Scales all coordinates of a 3xN point set.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, Eigen::Dynamic> apply_scale(
    const Eigen::MatrixBase<Derived>& points, typename Derived::Scalar s_r) {
  static_assert(Derived::RowsAtCompileTime == 3, "points must be 3xN");
  return points * s_r;
}

}  // namespace spheremv
