#include "spheremv/correspondence.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "spheremv/errors.hpp"

namespace spheremv {
namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Vector2d corrected_center(const EllipseObservation& obs, const CameraView& view) {
  return projected_sphere_center(obs.ellipse, view.intrinsics);
}

}  // namespace

Eigen::Matrix3d fundamental_from_views(const CameraView& view_l, const CameraView& view_k) {
  const Eigen::Matrix3d rel_rot = view_k.rot * view_l.rot.transpose();
  const Eigen::Vector3d rel_t = view_k.t - rel_rot * view_l.t;
  const double scale = std::max({1.0, view_l.t.norm(), view_k.t.norm()});
  if (rel_t.norm() <= 1e-12 * scale) {
    throw DegenerateGeometry("views '" + view_l.image_id + "' and '" + view_k.image_id +
                             "' share a camera center");
  }
  const Eigen::Matrix3d essential = skew(rel_t) * rel_rot;
  const Eigen::Matrix3d f = view_k.intrinsics.calibration_matrix().inverse().transpose() *
                            essential * view_l.intrinsics.calibration_matrix().inverse();
  return f / f.norm();
}

double epipolar_distance(const Eigen::Matrix3d& f, const Eigen::Vector2d& point_l,
                         const Eigen::Vector2d& point_k) {
  const Eigen::Vector3d line = f * point_l.homogeneous();
  const double norm = line.head<2>().norm();
  if (norm == 0.0) return std::abs(line.z()) == 0.0 ? 0.0 : INFINITY;
  return std::abs(point_k.homogeneous().dot(line)) / norm;
}

std::vector<EpipolarCandidate> epipolar_candidates(const EllipseObservation& e_l,
                                                   const CameraView& view_l,
                                                   std::span<const EllipseObservation> candidates_k,
                                                   const CameraView& view_k,
                                                   const Eigen::Matrix3d& f, double tol_px) {
  const Eigen::Vector2d x_l = corrected_center(e_l, view_l);
  std::vector<EpipolarCandidate> out;
  for (std::size_t i = 0; i < candidates_k.size(); ++i) {
    const double d = epipolar_distance(f, x_l, corrected_center(candidates_k[i], view_k));
    if (d <= tol_px) out.push_back({i, d});
  }
  return out;
}

double reprojection_distance(const Ellipse& observed, const Ellipse& predicted) {
  const Eigen::Vector4d delta(observed.x_ce - predicted.x_ce, observed.y_ce - predicted.y_ce,
                              observed.a_e - predicted.a_e, observed.b_e - predicted.b_e);
  return delta.norm();
}

Ellipse reproject_sphere(const Sphere& world_sphere, const CameraView& view) {
  return project_sphere<double>(world_to_camera(world_sphere.center, view), world_sphere.radius,
                                view.intrinsics);
}

double default_epipolar_tolerance(std::span<const EllipseObservation> observations) {
  double max_var = 0.0;
  for (const auto& obs : observations) {
    if (obs.cov) max_var = std::max({max_var, (*obs.cov)(2, 2), (*obs.cov)(3, 3)});
  }
  return std::max(kDefaultEpipolarTolPx, 2.0 * std::sqrt(max_var));
}

MatchResult match_ellipses(const CameraView& view_l, std::span<const EllipseObservation> ellipses_l,
                           const CameraView& view_k, std::span<const EllipseObservation> ellipses_k,
                           double tol_px) {
  MatchResult result;
  const Eigen::Matrix3d f = fundamental_from_views(view_l, view_k);
  const Eigen::Matrix3d f_back = f.transpose();

  std::vector<Eigen::Vector2d> centers_k;
  centers_k.reserve(ellipses_k.size());
  for (const auto& e : ellipses_k) centers_k.push_back(corrected_center(e, view_k));

  std::vector<MatchCandidate> candidates;
  for (std::size_t l = 0; l < ellipses_l.size(); ++l) {
    const Eigen::Vector2d x_l = corrected_center(ellipses_l[l], view_l);
    for (std::size_t k = 0; k < ellipses_k.size(); ++k) {
      const double d_forward = epipolar_distance(f, x_l, centers_k[k]);
      const double d_back = epipolar_distance(f_back, centers_k[k], x_l);
      const double d_epi = std::max(d_forward, d_back);
      if (!(d_epi <= tol_px)) continue;

      const MatchedObservation pair[] = {{&view_l, &ellipses_l[l]}, {&view_k, &ellipses_k[k]}};
      MatchCandidate c;
      try {
        c.sphere = reconstruct_sphere(pair);
        c.reprojection_distance =
            reprojection_distance(ellipses_l[l].ellipse, reproject_sphere(c.sphere.sphere, view_l)) +
            reprojection_distance(ellipses_k[k].ellipse, reproject_sphere(c.sphere.sphere, view_k));
      } catch (const GeometryError&) {
        continue;  // hypothesis has no valid sphere
      }
      if (!std::isfinite(c.reprojection_distance)) continue;
      c.index_l = l;
      c.index_k = k;
      c.ellipse_l = ellipses_l[l].ellipse_id;
      c.ellipse_k = ellipses_k[k].ellipse_id;
      c.epipolar_distance = d_epi;
      candidates.push_back(std::move(c));
    }
  }

  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    return std::tie(a.reprojection_distance, a.index_l, a.index_k) <
           std::tie(b.reprojection_distance, b.index_l, b.index_k);
  });
  std::vector<bool> used_l(ellipses_l.size(), false), used_k(ellipses_k.size(), false);
  for (auto& c : candidates) {
    if (used_l[c.index_l] || used_k[c.index_k]) continue;
    used_l[c.index_l] = used_k[c.index_k] = true;
    result.matches.push_back(std::move(c));
  }
  std::sort(result.matches.begin(), result.matches.end(),
            [](const auto& a, const auto& b) { return a.index_l < b.index_l; });
  for (std::size_t l = 0; l < used_l.size(); ++l) {
    if (!used_l[l]) result.unmatched_l.push_back(l);
  }
  for (std::size_t k = 0; k < used_k.size(); ++k) {
    if (!used_k[k]) result.unmatched_k.push_back(k);
  }
  return result;
}

}  // namespace spheremv
