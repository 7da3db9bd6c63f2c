#include "hmpc/so3.hpp"

#include <cmath>
#include <stdexcept>

namespace hmpc {

Eigen::Matrix3d skew(const Eigen::Vector3d& a) {
  Eigen::Matrix3d A;
  A << 0.0, -a.z(), a.y(), a.z(), 0.0, -a.x(), -a.y(), a.x(), 0.0;
  return A;
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d W = skew(w);
  if (theta < 1e-10) {
    return Eigen::Matrix3d::Identity() + W + 0.5 * W * W;
  }
  return Eigen::Matrix3d::Identity() + W * (std::sin(theta) / theta) +
         W * W * ((1.0 - std::cos(theta)) / theta2);
}

Eigen::Vector3d log_so3(const Eigen::Matrix3d& R) {
  // Quaternion route: well conditioned everywhere except the exact
  // pi branch point, unlike the (R - R^T)-based formula.
  const Eigen::Vector4d o = quat_from_rotation(R);
  const Eigen::Vector3d v = o.tail<3>();
  const double vn = v.norm();
  const double theta = 2.0 * std::atan2(vn, o(0));
  if (vn < 1e-12) {
    return 2.0 * v;  // small angle: log ~ 2 * vector part
  }
  return (theta / vn) * v;
}

double rotation_angle(const Eigen::Matrix3d& R) {
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  return std::acos(c);
}

Eigen::Vector4d quat_from_rotation(const Eigen::Matrix3d& R) {
  const Eigen::Quaterniond q(R);
  return quat_canonicalize(Eigen::Vector4d(q.w(), q.x(), q.y(), q.z()));
}

Eigen::Matrix3d rotation_from_quat(const Eigen::Vector4d& o) {
  const Eigen::Quaterniond q(o(0), o(1), o(2), o(3));
  return q.normalized().toRotationMatrix();
}

Eigen::Vector4d quat_canonicalize(const Eigen::Vector4d& o) {
  Eigen::Vector4d out = o / o.norm();
  if (out(0) < 0.0) out = -out;
  return out;
}

Eigen::Matrix<double, 4, 3> quat_rate_matrix(const Eigen::Vector4d& o) {
  if (std::abs(o.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("quat_rate_matrix: quaternion is not unit norm");
  }
  const double eta = o(0);
  const Eigen::Vector3d eps = o.tail<3>();
  Eigen::Matrix<double, 4, 3> G;
  G.row(0) = -eps.transpose();
  // World-frame angular velocity: odot = 0.5*(0, w) (x) o, which gives
  // eta*I - skew(eps) in the vector block (body frame would flip the sign).
  G.bottomRows<3>() = eta * Eigen::Matrix3d::Identity() - skew(eps);
  return G;
}

}  // namespace hmpc
