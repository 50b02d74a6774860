#pragma once

// Spherical-ellipse test. An ellipse that is the image of a sphere satisfies
//
//   a_e = b_e * sqrt(((x_ce - p_x)^2 + (y_ce - p_y)^2) / (f^2 + b_e^2) + 1)
//
// so tau = 1 - (b_e / a_e) * sqrt(...) vanishes for it. Measurement noise is
// handled with first-order variance propagation of tau and a k-sigma test.

#include <cmath>
#include <optional>

#include <Eigen/Core>

#include "spheremv/camera.hpp"
#include "spheremv/projection.hpp"

namespace spheremv {

template <typename Scalar>
using Vec7 = Eigen::Matrix<Scalar, 7, 1>;

template <typename Scalar>
Scalar tau(const EllipseParams<Scalar>& e, const Intrinsics<Scalar>& k) {
  using std::sqrt;
  const Scalar dx = e.x_ce - k.px;
  const Scalar dy = e.y_ce - k.py;
  const Scalar g = k.f * k.f + e.b_e * e.b_e;
  return Scalar(1) - (e.b_e / e.a_e) * sqrt((dx * dx + dy * dy) / g + Scalar(1));
}

// Gradient of tau in the order (a_e, b_e, x_ce, y_ce, p_x, p_y, f).
// Each entry is expressed through (1 - tau), which equals (b_e / a_e) times
// the radical.
template <typename Scalar>
Vec7<Scalar> tau_jacobian(const EllipseParams<Scalar>& e, const Intrinsics<Scalar>& k) {
  const Scalar a = e.a_e, b = e.b_e, f = k.f;
  const Scalar dx = e.x_ce - k.px;
  const Scalar dy = e.y_ce - k.py;
  const Scalar g = f * f + b * b;
  const Scalar one_minus_tau = Scalar(1) - tau(e, k);
  const Scalar a2_omt_g = a * a * one_minus_tau * g;

  Vec7<Scalar> j;
  j(0) = one_minus_tau / a;
  j(1) = -f * f * one_minus_tau / (b * g) - b * b * b / a2_omt_g;
  j(2) = -b * b * dx / a2_omt_g;
  j(3) = -b * b * dy / a2_omt_g;
  j(4) = -j(2);
  j(5) = -j(3);
  j(6) = f * (a * a * one_minus_tau * one_minus_tau - b * b) / a2_omt_g;
  return j;
}

// sigma_tau^2 = J diag(ellipse_cov, iop_cov) J^T. Ellipse covariance order is
// (a_e, b_e, x_ce, y_ce); IOP order is (p_x, p_y, f). Throws InvalidCovariance
// unless both blocks are symmetric PSD.
double tau_variance(const Vec7<double>& jacobian, const Eigen::Matrix4d& ellipse_cov,
                    const Eigen::Matrix3d& iop_cov);

struct GateReport {
  double tau = 0.0;
  double sigma_tau = 0.0;
  double k = 2.0;
  bool accepted = false;
};

inline constexpr double kDefaultGateK = 2.0;
inline constexpr double kDefaultEllipseSigmaPx = 0.5;

// Diagonal covariance with the same standard deviation on all four ellipse
// parameters. Used when a detector supplies none.
Eigen::Matrix4d default_ellipse_covariance(double sigma_px = kDefaultEllipseSigmaPx);

// Accepts iff |tau| <= k * sigma_tau.
GateReport classify_spherical(const Ellipse& e, const Intrinsics<double>& k_iop,
                              const Eigen::Matrix4d& ellipse_cov, const Eigen::Matrix3d& iop_cov,
                              double k = kDefaultGateK);

// Gate an observation against its view. Missing covariances fall back to
// default_ellipse_covariance(default_sigma_px) and exact intrinsics.
GateReport classify_spherical(const EllipseObservation& obs, const CameraView& view,
                              double k = kDefaultGateK,
                              double default_sigma_px = kDefaultEllipseSigmaPx);

}  // namespace spheremv
