#pragma once

// First-order input stage: the plant input u follows u' = A u + B v,
// with v the new free input.  A must be Hurwitz so bounded commands
// keep u bounded, and B invertible so any u' is reachable.

#include <Eigen/Dense>

#include <stdexcept>

namespace cbfnav {

struct ControlDynamics {
  Eigen::Matrix2d A;
  Eigen::Matrix2d B;
  Eigen::Matrix2d B_inv;

  static ControlDynamics make(const Eigen::Matrix2d& A,
                              const Eigen::Matrix2d& B) {
    // 2x2 stability: negative trace and positive determinant.
    if (!(A.trace() < 0.0 && A.determinant() > 0.0)) {
      throw std::invalid_argument("input stage matrix must be stable");
    }
    const double det = B.determinant();
    if (std::abs(det) < 1e-12 * (1.0 + B.cwiseAbs().maxCoeff())) {
      throw std::invalid_argument("input gain matrix must be invertible");
    }
    ControlDynamics out;
    out.A = A;
    out.B = B;
    out.B_inv = B.inverse();
    return out;
  }

  static ControlDynamics identity_stage() {
    return make(-Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity());
  }
};

}  // namespace cbfnav
