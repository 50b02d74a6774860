#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace spheremv {

// Symmetric (to 1e-9 relative) with no eigenvalue of the symmetric part below
// -1e-9 * trace.
template <typename Derived>
bool is_symmetric_psd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  const Scalar scale = std::max(Scalar(1), m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-9) * scale) return false;
  const Matrix sym = (m + m.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  const Scalar trace = std::abs(sym.trace());
  return eig.eigenvalues().minCoeff() >= -Scalar(1e-9) * trace;
}

}  // namespace spheremv
