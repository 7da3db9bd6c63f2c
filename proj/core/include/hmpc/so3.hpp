#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace hmpc {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6Xd = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// Skew-symmetric matrix such that skew(a)*b = a x b.
Eigen::Matrix3d skew(const Eigen::Vector3d& a);

/// Rodrigues formula, exp of the rotation vector w.
Eigen::Matrix3d exp_so3(const Eigen::Vector3d& w);

/// Rotation vector of R. Stable up to (but excluding) angle pi,
/// where the branch is ambiguous; callers that care must guard.
Eigen::Vector3d log_so3(const Eigen::Matrix3d& R);

/// Rotation angle of R in [0, pi].
double rotation_angle(const Eigen::Matrix3d& R);

/// Scalar-first unit quaternion (w, x, y, z) from a rotation matrix,
/// sign-canonicalized so the scalar part is >= 0.
Eigen::Vector4d quat_from_rotation(const Eigen::Matrix3d& R);

Eigen::Matrix3d rotation_from_quat(const Eigen::Vector4d& o);

/// Normalize and flip to the w >= 0 hemisphere.
Eigen::Vector4d quat_canonicalize(const Eigen::Vector4d& o);

/// Quaternion rate matrix G with odot = 0.5 * G(o) * w for a
/// world-frame angular velocity w. Throws std::invalid_argument if
/// |o| deviates from 1 by more than 1e-9.
Eigen::Matrix<double, 4, 3> quat_rate_matrix(const Eigen::Vector4d& o);

}  // namespace hmpc
