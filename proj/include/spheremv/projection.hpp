#pragma once

// Closed-form mapping between a sphere and the ellipse it projects to in a
// pinhole camera. All functions here work in the camera frame; use
// world_to_camera() first for world-frame spheres.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "spheremv/camera.hpp"
#include "spheremv/errors.hpp"

namespace spheremv {

template <typename Scalar>
struct EllipseParams {
  Scalar x_ce = Scalar(0);
  Scalar y_ce = Scalar(0);
  Scalar a_e = Scalar(0);  // semi-major
  Scalar b_e = Scalar(0);  // semi-minor
  Scalar theta = Scalar(0);  // major-axis angle, [-pi/2, pi/2)

  Vec2<Scalar> center() const { return {x_ce, y_ce}; }
};

using Ellipse = EllipseParams<double>;

// Parameter order of `cov` is (a_e, b_e, x_ce, y_ce).
struct EllipseObservation {
  std::string image_id;
  std::string ellipse_id;
  Ellipse ellipse;
  std::optional<Eigen::Matrix4d> cov;
};

// Throws InvalidArgument unless a_e >= b_e > 0, theta is in range and cov is
// symmetric PSD.
void validate(const EllipseObservation& obs);

enum class Frame { kWorld, kCamera };

struct Sphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
  Frame frame = Frame::kWorld;
  std::string image_id;  // set when frame == kCamera
};

// Ellipses are pi-periodic; map any angle into [-pi/2, pi/2).
template <typename Scalar>
Scalar fold_half_turn(Scalar angle) {
  using std::floor;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  Scalar folded = angle - pi * floor((angle + pi / Scalar(2)) / pi);
  if (folded >= pi / Scalar(2)) folded -= pi;
  if (folded < -pi / Scalar(2)) folded += pi;
  return folded;
}

// Relative margin on Z_C > R below which the projection is refused.
inline constexpr double kDegenerateDepthMargin = 1e-9;

template <typename Scalar>
EllipseParams<Scalar> project_sphere(const Vec3<Scalar>& center, Scalar radius,
                                     const Intrinsics<Scalar>& k) {
  using std::atan2;
  using std::sqrt;
  const Scalar x = center.x(), y = center.y(), z = center.z();
  if (!(radius > Scalar(0)) || !(z > radius * Scalar(1 + kDegenerateDepthMargin))) {
    throw DegenerateProjection("sphere is not strictly in front of the camera (Z_C <= R)");
  }
  const Scalar zz_rr = z * z - radius * radius;
  EllipseParams<Scalar> e;
  e.a_e = k.f * radius * sqrt(x * x + y * y + zz_rr) / zz_rr;
  e.b_e = k.f * radius / sqrt(zz_rr);
  e.x_ce = k.px + k.f * z * x / zz_rr;
  e.y_ce = k.py + k.f * z * y / zz_rr;
  e.theta = (x == Scalar(0) && y == Scalar(0)) ? Scalar(0) : fold_half_turn(atan2(y, x));
  return e;
}

inline Ellipse project_sphere(const Sphere& sphere, const Intrinsics<double>& k) {
  if (sphere.frame != Frame::kCamera) {
    throw InvalidArgument("project_sphere expects a camera-frame sphere");
  }
  return project_sphere<double>(sphere.center, sphere.radius, k);
}

// Image of the sphere center; differs from the ellipse center off-axis.
template <typename Scalar>
Vec2<Scalar> projected_sphere_center(const EllipseParams<Scalar>& e, const Intrinsics<Scalar>& k) {
  const Scalar f2 = k.f * k.f;
  const Scalar b2 = e.b_e * e.b_e;
  const Scalar denom = f2 + b2;
  return {(f2 * e.x_ce + b2 * k.px) / denom, (f2 * e.y_ce + b2 * k.py) / denom};
}

// Camera-frame center of a sphere of known radius from a single ellipse.
// Scales linearly with `radius`.
template <typename Scalar>
Vec3<Scalar> center_from_single_view(const EllipseParams<Scalar>& e, const Intrinsics<Scalar>& k,
                                     Scalar radius) {
  using std::sqrt;
  const Scalar root = sqrt(k.f * k.f + e.b_e * e.b_e);
  const Scalar lateral = k.f * radius / (e.b_e * root);
  return {lateral * (e.x_ce - k.px), lateral * (e.y_ce - k.py), radius * root / e.b_e};
}

inline Sphere center_from_single_view(const EllipseObservation& obs, const Intrinsics<double>& k,
                                      double radius) {
  Sphere s;
  s.center = center_from_single_view<double>(obs.ellipse, k, radius);
  s.radius = radius;
  s.frame = Frame::kCamera;
  s.image_id = obs.image_id;
  return s;
}

template <typename Scalar>
Scalar radius_from_depth(Scalar depth, Scalar b_e, Scalar f) {
  using std::sqrt;
  return depth * b_e / sqrt(b_e * b_e + f * f);
}

}  // namespace spheremv
