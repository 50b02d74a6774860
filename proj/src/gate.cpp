#include "spheremv/gate.hpp"

#include <cmath>

#include "spheremv/covariance.hpp"
#include "spheremv/errors.hpp"

namespace spheremv {

double tau_variance(const Vec7<double>& jacobian, const Eigen::Matrix4d& ellipse_cov,
                    const Eigen::Matrix3d& iop_cov) {
  if (!is_symmetric_psd(ellipse_cov)) {
    throw InvalidCovariance("ellipse covariance is not symmetric positive semi-definite");
  }
  if (!is_symmetric_psd(iop_cov)) {
    throw InvalidCovariance("IOP covariance is not symmetric positive semi-definite");
  }
  Eigen::Matrix<double, 7, 7> sigma = Eigen::Matrix<double, 7, 7>::Zero();
  sigma.topLeftCorner<4, 4>() = ellipse_cov;
  sigma.bottomRightCorner<3, 3>() = iop_cov;
  const double variance = jacobian.dot(sigma * jacobian);
  // Roundoff on a PSD form can dip a hair below zero.
  return std::max(0.0, variance);
}

Eigen::Matrix4d default_ellipse_covariance(double sigma_px) {
  return Eigen::Matrix4d::Identity() * (sigma_px * sigma_px);
}

GateReport classify_spherical(const Ellipse& e, const Intrinsics<double>& k_iop,
                              const Eigen::Matrix4d& ellipse_cov, const Eigen::Matrix3d& iop_cov,
                              double k) {
  if (!(k > 0.0)) throw InvalidArgument("gate multiplier k must be positive");
  GateReport report;
  report.k = k;
  report.tau = tau(e, k_iop);
  report.sigma_tau = std::sqrt(tau_variance(tau_jacobian(e, k_iop), ellipse_cov, iop_cov));
  report.accepted = std::abs(report.tau) <= k * report.sigma_tau;
  return report;
}

GateReport classify_spherical(const EllipseObservation& obs, const CameraView& view, double k,
                              double default_sigma_px) {
  const Eigen::Matrix4d ellipse_cov = obs.cov.value_or(default_ellipse_covariance(default_sigma_px));
  const Eigen::Matrix3d iop_cov = view.iop_cov.value_or(Eigen::Matrix3d::Zero());
  return classify_spherical(obs.ellipse, view.intrinsics, ellipse_cov, iop_cov, k);
}

}  // namespace spheremv
