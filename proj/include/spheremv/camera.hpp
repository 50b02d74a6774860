#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace spheremv {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Mat34 = Eigen::Matrix<Scalar, 3, 4>;

// Unit-aspect, zero-skew pinhole intrinsics in pixels.
template <typename Scalar>
struct Intrinsics {
  Scalar f = Scalar(1);
  Scalar px = Scalar(0);
  Scalar py = Scalar(0);

  Mat3<Scalar> calibration_matrix() const {
    Mat3<Scalar> k;
    k << f, Scalar(0), px, Scalar(0), f, py, Scalar(0), Scalar(0), Scalar(1);
    return k;
  }
};

// One calibrated image. The exterior orientation maps world to camera:
//   X_cam = rot * X_world + t
struct CameraView {
  std::string image_id;
  Intrinsics<double> intrinsics;
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  // Covariance of (p_x, p_y, f).
  std::optional<Eigen::Matrix3d> iop_cov;

  double f() const { return intrinsics.f; }
  double px() const { return intrinsics.px; }
  double py() const { return intrinsics.py; }

  // Camera center in world coordinates, -rot^T t.
  Eigen::Vector3d center() const { return -rot.transpose() * t; }
};

// Throws InvalidArgument when rot is not a proper rotation, f <= 0, or
// iop_cov is not symmetric PSD.
void validate(const CameraView& view);

template <typename Scalar>
Mat34<Scalar> projective_matrix(const Intrinsics<Scalar>& k, const Mat3<Scalar>& rot,
                                const Vec3<Scalar>& t) {
  Mat34<Scalar> rt;
  rt.template leftCols<3>() = rot;
  rt.col(3) = t;
  return k.calibration_matrix() * rt;
}

// K [rot | t].
inline Eigen::Matrix<double, 3, 4> build_projective_matrix(const CameraView& view) {
  return projective_matrix<double>(view.intrinsics, view.rot, view.t);
}

template <typename Derived>
Vec3<typename Derived::Scalar> world_to_camera(const Eigen::MatrixBase<Derived>& point,
                                               const CameraView& view) {
  using Scalar = typename Derived::Scalar;
  return view.rot.cast<Scalar>() * point + view.t.cast<Scalar>();
}

template <typename Derived>
Vec3<typename Derived::Scalar> camera_to_world(const Eigen::MatrixBase<Derived>& point,
                                               const CameraView& view) {
  using Scalar = typename Derived::Scalar;
  return view.rot.cast<Scalar>().transpose() * (point - view.t.cast<Scalar>());
}

// Pinhole projection of a world point to pixels.
inline Eigen::Vector2d project_point(const Eigen::Vector3d& world, const CameraView& view) {
  const Eigen::Vector3d x = build_projective_matrix(view) * world.homogeneous();
  return x.hnormalized();
}

}  // namespace spheremv
