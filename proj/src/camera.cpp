#include "spheremv/camera.hpp"

#include <cmath>
#include <numbers>

#include "spheremv/covariance.hpp"
#include "spheremv/errors.hpp"
#include "spheremv/projection.hpp"

namespace spheremv {

void validate(const CameraView& view) {
  const auto where = [&] { return "view '" + view.image_id + "': "; };
  if (!(view.intrinsics.f > 0.0) || !std::isfinite(view.intrinsics.f)) {
    throw InvalidArgument(where() + "focal length must be positive");
  }
  if (!view.rot.allFinite() || !view.t.allFinite() || !std::isfinite(view.intrinsics.px) ||
      !std::isfinite(view.intrinsics.py)) {
    throw InvalidArgument(where() + "non-finite pose or principal point");
  }
  const double ortho = (view.rot.transpose() * view.rot - Eigen::Matrix3d::Identity()).norm();
  if (ortho >= 1e-9) {
    throw InvalidArgument(where() + "rotation is not orthonormal");
  }
  if (view.rot.determinant() <= 0.0) {
    throw InvalidArgument(where() + "rotation has negative determinant");
  }
  if (view.iop_cov && !is_symmetric_psd(*view.iop_cov)) {
    throw InvalidCovariance(where() + "iop_cov is not symmetric positive semi-definite");
  }
}

void validate(const EllipseObservation& obs) {
  const auto where = [&] { return "ellipse '" + obs.image_id + "/" + obs.ellipse_id + "': "; };
  const Ellipse& e = obs.ellipse;
  if (!std::isfinite(e.x_ce) || !std::isfinite(e.y_ce) || !std::isfinite(e.a_e) ||
      !std::isfinite(e.b_e) || !std::isfinite(e.theta)) {
    throw InvalidArgument(where() + "non-finite parameter");
  }
  if (!(e.b_e > 0.0) || e.a_e < e.b_e) {
    throw InvalidArgument(where() + "requires a_e >= b_e > 0");
  }
  constexpr double half_pi = std::numbers::pi / 2;
  if (e.theta < -half_pi || e.theta >= half_pi) {
    throw InvalidArgument(where() + "theta must lie in [-pi/2, pi/2)");
  }
  if (obs.cov && !is_symmetric_psd(*obs.cov)) {
    throw InvalidCovariance(where() + "covariance is not symmetric positive semi-definite");
  }
}

}  // namespace spheremv
