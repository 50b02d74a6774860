#pragma once

#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spheremv/camera.hpp"

namespace spheremv {

struct TiePoint {
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
  std::vector<std::string> visible_in;
};

struct ImageNetwork {
  std::vector<CameraView> views;
  std::vector<TiePoint> tie_points;

  const CameraView* find(const std::string& image_id) const;
};

// Throws InvalidArgument on duplicate image ids, invalid views, or tie points
// that reference unknown views or are seen by fewer than two of them.
void validate(const ImageNetwork& network);

struct PairScore {
  std::string i, j;
  double alpha_ij = 0.0;  // radians
  double ov_i = 0.0;
  double ov_j = 0.0;
  double theta_ij = 0.0;
};

inline constexpr double kDefaultMinConvergence = 20.0 * std::numbers::pi / 180.0;

// Mean, over tie points seen by both views, of the angle at the point between
// the rays to the two camera centers. Throws NoSharedPoints.
double convergence_angle(const CameraView& view_i, const CameraView& view_j,
                         const std::vector<TiePoint>& tie_points);

// Tie-point count of each image divided by the largest count in the network.
std::map<std::string, double> network_overlap(const ImageNetwork& network);

// Pair maximizing alpha_ij / alpha_max + (Ov_i + Ov_j) / (2 Ov_max) among
// pairs with alpha_ij > min_angle. Pairs are reported with i < j and ties go
// to the lexicographically smallest (i, j). Throws NoAdmissiblePair.
PairScore best_pair(const ImageNetwork& network, double min_angle = kDefaultMinConvergence);

// All scored pairs sharing at least one tie point, sorted by (i, j).
std::vector<PairScore> score_pairs(const ImageNetwork& network);

// Point nearest, in least squares, to every principal axis. Used as a single
// stand-in tie point when a network carries none.
Eigen::Vector3d principal_axes_focus(const std::vector<CameraView>& views);

// Copy of `network` with one synthetic tie point at principal_axes_focus(),
// seen by every view.
ImageNetwork with_fallback_tie_point(const ImageNetwork& network);

}  // namespace spheremv
