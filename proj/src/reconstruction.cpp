#include "spheremv/reconstruction.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "spheremv/errors.hpp"

namespace spheremv {
namespace {

void require_views(std::span<const CenterObservation> observations) {
  if (observations.size() < 2) {
    throw DegenerateGeometry("triangulation needs at least two views");
  }
  for (const auto& obs : observations) {
    if (obs.view == nullptr) throw InvalidArgument("null camera view");
  }
}

// Viewing ray through a pixel, as (origin, unit direction) in world frame.
std::pair<Eigen::Vector3d, Eigen::Vector3d> viewing_ray(const CenterObservation& obs) {
  const CameraView& v = *obs.view;
  const Eigen::Vector3d dir_cam((obs.pixel.x() - v.px()) / v.f(), (obs.pixel.y() - v.py()) / v.f(),
                                1.0);
  return {v.center(), (v.rot.transpose() * dir_cam).normalized()};
}

}  // namespace

Eigen::Vector3d triangulate_center(std::span<const CenterObservation> observations) {
  require_views(observations);
  const auto n = static_cast<Eigen::Index>(observations.size());

  // Similarity-normalize the world frame about the camera centers.
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& obs : observations) centroid += obs.view->center();
  centroid /= static_cast<double>(n);
  double spread = 0.0;
  for (const auto& obs : observations) spread += (obs.view->center() - centroid).norm();
  spread /= static_cast<double>(n);
  if (spread <= 1e-12 * std::max(1.0, centroid.norm())) {
    throw DegenerateGeometry("camera centers coincide; the center cannot be triangulated");
  }

  Eigen::MatrixXd design(2 * n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const CenterObservation& obs = observations[static_cast<std::size_t>(i)];
    const CameraView& v = *obs.view;
    Eigen::Matrix<double, 3, 4> pose;
    pose.leftCols<3>() = spread * v.rot;
    pose.col(3) = v.rot * centroid + v.t;
    const double xn = (obs.pixel.x() - v.px()) / v.f();
    const double yn = (obs.pixel.y() - v.py()) / v.f();
    design.row(2 * i) = xn * pose.row(2) - pose.row(0);
    design.row(2 * i + 1) = yn * pose.row(2) - pose.row(1);
  }
  for (Eigen::Index r = 0; r < design.rows(); ++r) {
    const double norm = design.row(r).norm();
    if (norm > 0.0) design.row(r) /= norm;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const Eigen::Vector4d sv = svd.singularValues().head<4>();
  if (design.rows() < 4 || sv(2) <= 1e-10 * sv(0)) {
    throw DegenerateGeometry("triangulation design matrix is rank deficient");
  }
  const Eigen::Vector4d x = svd.matrixV().col(3);
  if (std::abs(x(3)) <= 1e-12 * x.head<3>().norm()) {
    throw DegenerateGeometry("triangulated center is at infinity");
  }
  return spread * x.hnormalized() + centroid;
}

Eigen::Vector3d triangulate_midpoint(std::span<const CenterObservation> observations) {
  require_views(observations);
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  int pairs = 0;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    for (std::size_t j = i + 1; j < observations.size(); ++j) {
      const auto [o1, d1] = viewing_ray(observations[i]);
      const auto [o2, d2] = viewing_ray(observations[j]);
      const Eigen::Vector3d w = o1 - o2;
      const double b = d1.dot(d2);
      const double denom = 1.0 - b * b;
      if (denom <= 1e-15) continue;  // parallel rays
      const double s = (b * d2.dot(w) - d1.dot(w)) / denom;
      const double u = (d2.dot(w) - b * d1.dot(w)) / denom;
      sum += 0.5 * ((o1 + s * d1) + (o2 + u * d2));
      ++pairs;
    }
  }
  if (pairs == 0) throw DegenerateGeometry("all viewing rays are parallel");
  return sum / pairs;
}

double reprojection_rms(const Eigen::Vector3d& point,
                        std::span<const CenterObservation> observations) {
  if (observations.empty()) return 0.0;
  double sum_sq = 0.0;
  for (const auto& obs : observations) {
    sum_sq += (project_point(point, *obs.view) - obs.pixel).squaredNorm();
  }
  return std::sqrt(sum_sq / static_cast<double>(observations.size()));
}

double estimate_radius_ls(std::span<const double> radii, std::span<const double> weights) {
  if (radii.empty()) throw EmptyInput("no radii to average");
  if (weights.empty()) {
    double sum = 0.0;
    for (double r : radii) sum += r;
    return sum / static_cast<double>(radii.size());
  }
  if (weights.size() != radii.size()) {
    throw InvalidArgument("weights and radii differ in length");
  }
  double weighted = 0.0, total = 0.0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw InvalidArgument("weights must be nonnegative");
    weighted += weights[i] * radii[i];
    total += weights[i];
  }
  if (!(total > 0.0)) throw InvalidArgument("weights must have a positive sum");
  return weighted / total;
}

SphereModel reconstruct_sphere(std::span<const MatchedObservation> matched,
                               std::span<const double> weights) {
  if (matched.size() < 2) {
    throw DegenerateGeometry("sphere reconstruction needs at least two views");
  }
  std::vector<CenterObservation> centers;
  centers.reserve(matched.size());
  for (const auto& m : matched) {
    if (m.view == nullptr || m.ellipse == nullptr) throw InvalidArgument("null observation");
    centers.push_back({m.view, projected_sphere_center(m.ellipse->ellipse, m.view->intrinsics)});
  }
  const Eigen::Vector3d center_world = triangulate_center(centers);

  SphereModel model;
  std::vector<double> radii;
  radii.reserve(matched.size());
  for (const auto& m : matched) {
    const Eigen::Vector3d c = world_to_camera(center_world, *m.view);
    if (!(c.z() > 0.0)) {
      throw DegenerateProjection("triangulated center lies behind view '" + m.view->image_id + "'");
    }
    const double r = radius_from_depth(c.z(), m.ellipse->ellipse.b_e, m.view->f());
    radii.push_back(r);
    model.per_view_radii.push_back({m.view->image_id, r});
  }

  model.sphere.center = center_world;
  model.sphere.radius = estimate_radius_ls(radii, weights);
  model.sphere.frame = Frame::kWorld;
  for (double r : radii) {
    model.radius_spread = std::max(model.radius_spread, std::abs(r - model.sphere.radius));
  }
  model.triangulation_residual = reprojection_rms(center_world, centers);
  return model;
}

ScaleResult metric_scale(std::span<const ScaleAnchor> anchors) {
  if (anchors.empty()) throw EmptyInput("metric scale needs at least one anchor");
  for (const auto& a : anchors) {
    if (!(a.real_radius > 0.0) || !(a.estimated_radius > 0.0)) {
      throw InvalidAnchor("anchor radii must be positive");
    }
  }
  ScaleResult result;
  if (anchors.size() == 1) {
    result.s_r = anchors[0].real_radius / anchors[0].estimated_radius;
  } else {
    double real_sq = 0.0, est_sq = 0.0;
    for (const auto& a : anchors) {
      real_sq += a.real_radius * a.real_radius;
      est_sq += a.estimated_radius * a.estimated_radius;
    }
    result.s_r = std::sqrt(real_sq / est_sq);
  }
  double sum_sq = 0.0;
  for (const auto& a : anchors) {
    const double d = a.real_radius - result.s_r * a.estimated_radius;
    sum_sq += d * d;
  }
  result.residual_rmse = std::sqrt(sum_sq / static_cast<double>(anchors.size()));
  return result;
}

Sphere apply_scale(const Sphere& sphere, double s_r) {
  Sphere out = sphere;
  out.center *= s_r;
  out.radius *= s_r;
  return out;
}

SphereModel apply_scale(const SphereModel& model, double s_r) {
  SphereModel out = model;
  out.sphere = apply_scale(model.sphere, s_r);
  for (auto& v : out.per_view_radii) v.radius *= s_r;
  out.radius_spread *= s_r;
  out.scale_applied = model.scale_applied.value_or(1.0) * s_r;
  return out;
}

}  // namespace spheremv
