#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spheremv/camera.hpp"
#include "spheremv/projection.hpp"
#include "spheremv/reconstruction.hpp"

namespace spheremv {

// F with x_k^T F x_l = 0 for pixels x_l in view_l and x_k in view_k of a
// common world point. Unit Frobenius norm. Throws DegenerateGeometry when the
// camera centers coincide.
Eigen::Matrix3d fundamental_from_views(const CameraView& view_l, const CameraView& view_k);

// Pixel distance from `point_k` to the epipolar line F * point_l.
double epipolar_distance(const Eigen::Matrix3d& f, const Eigen::Vector2d& point_l,
                         const Eigen::Vector2d& point_k);

struct EpipolarCandidate {
  std::size_t index = 0;  // into the candidate list
  double distance = 0.0;  // pixels
};

// Candidates whose eccentricity-corrected center lies within `tol_px` of the
// epipolar line of e_l's corrected center.
std::vector<EpipolarCandidate> epipolar_candidates(const EllipseObservation& e_l,
                                                   const CameraView& view_l,
                                                   std::span<const EllipseObservation> candidates_k,
                                                   const CameraView& view_k,
                                                   const Eigen::Matrix3d& f, double tol_px);

// Euclidean distance over (x_ce, y_ce, a_e, b_e); theta is ignored.
double reprojection_distance(const Ellipse& observed, const Ellipse& predicted);

// Ellipse of a world-frame sphere in `view`.
Ellipse reproject_sphere(const Sphere& world_sphere, const CameraView& view);

inline constexpr double kDefaultEpipolarTolPx = 3.0;

// max(3 px, 2 sigma_center), sigma_center being the largest center standard
// deviation among the supplied observations' covariances.
double default_epipolar_tolerance(std::span<const EllipseObservation> observations);

struct MatchCandidate {
  std::size_t index_l = 0;
  std::size_t index_k = 0;
  std::string ellipse_l;
  std::string ellipse_k;
  double epipolar_distance = 0.0;      // pixels, larger of the two directions
  double reprojection_distance = 0.0;  // pixels, summed over both images
  SphereModel sphere;
};

struct MatchResult {
  std::vector<MatchCandidate> matches;  // sorted by index_l
  std::vector<std::size_t> unmatched_l;
  std::vector<std::size_t> unmatched_k;
};

// Every epipolar-admissible (e_l, e_k) pair is reconstructed as a sphere and
// reprojected into both images; one-to-one matches are then taken greedily by
// ascending total reprojection distance. Admissibility is checked in both
// directions so that swapping the images gives the same matches.
MatchResult match_ellipses(const CameraView& view_l, std::span<const EllipseObservation> ellipses_l,
                           const CameraView& view_k, std::span<const EllipseObservation> ellipses_k,
                           double tol_px);

}  // namespace spheremv
