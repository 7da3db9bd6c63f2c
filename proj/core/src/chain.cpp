#include "hmpc/chain.hpp"

#include <stdexcept>

namespace hmpc {

namespace {

Eigen::Matrix3d axis_rotation(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

void check_dims(const ChainModel& chain, const Eigen::VectorXd& q,
                const char* who) {
  if (q.size() != chain.dof()) {
    throw std::invalid_argument(std::string(who) +
                                ": joint vector length does not match chain DoF");
  }
}

}  // namespace

namespace detail {

FramePass frame_pass(const ChainModel& chain, const Eigen::VectorXd& q) {
  FramePass out;
  const int n = chain.dof();
  out.origin.reserve(n);
  out.axis.reserve(n);
  RigidTransform T = chain.base_transform;
  for (int i = 0; i < n; ++i) {
    const JointModule& m = chain.modules[i];
    T = T * m.parent_transform;
    out.origin.push_back(T.p);
    out.axis.push_back(T.R * m.axis);
    T.R = T.R * axis_rotation(m.axis, q(i));
  }
  T = T * chain.tool_transform;
  out.p_e = T.p;
  out.R_e = T.R;
  return out;
}

}  // namespace detail

std::pair<Eigen::Vector3d, Eigen::Matrix3d> forward_kinematics(
    const ChainModel& chain, const Eigen::VectorXd& q) {
  check_dims(chain, q, "forward_kinematics");
  const auto fp = detail::frame_pass(chain, q);
  return {fp.p_e, fp.R_e};
}

Matrix6Xd jacobian(const ChainModel& chain, const Eigen::VectorXd& q) {
  check_dims(chain, q, "jacobian");
  const auto fp = detail::frame_pass(chain, q);
  const int n = chain.dof();
  Matrix6Xd J(6, n);
  for (int i = 0; i < n; ++i) {
    J.col(i).head<3>() = fp.axis[i].cross(fp.p_e - fp.origin[i]);
    J.col(i).tail<3>() = fp.axis[i];
  }
  return J;
}

Matrix6Xd jacobian_dot(const ChainModel& chain, const Eigen::VectorXd& q,
                       const Eigen::VectorXd& qd) {
  check_dims(chain, q, "jacobian_dot");
  check_dims(chain, qd, "jacobian_dot");
  const auto fp = detail::frame_pass(chain, q);
  const int n = chain.dof();

  // Velocity propagation. Joint i's origin rides on link i-1, so its
  // linear velocity picks up contributions from joints 0..i-1 only;
  // the axis direction likewise rotates with the preceding links.
  std::vector<Eigen::Vector3d> omega(n + 1, Eigen::Vector3d::Zero());
  for (int i = 0; i < n; ++i) {
    omega[i + 1] = omega[i] + qd(i) * fp.axis[i];
  }
  std::vector<Eigen::Vector3d> zdot(n), pdot(n);
  for (int i = 0; i < n; ++i) {
    zdot[i] = omega[i].cross(fp.axis[i]);
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    for (int j = 0; j < i; ++j) {
      v += qd(j) * fp.axis[j].cross(fp.origin[i] - fp.origin[j]);
    }
    pdot[i] = v;
  }
  Eigen::Vector3d pe_dot = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    pe_dot += qd(i) * fp.axis[i].cross(fp.p_e - fp.origin[i]);
  }

  Matrix6Xd Jd(6, n);
  for (int i = 0; i < n; ++i) {
    Jd.col(i).head<3>() = zdot[i].cross(fp.p_e - fp.origin[i]) +
                          fp.axis[i].cross(pe_dot - pdot[i]);
    Jd.col(i).tail<3>() = zdot[i];
  }
  return Jd;
}

Eigen::MatrixXd build_b_kin(const ChainModel& chain, const JointState& s) {
  const int n = chain.dof();
  const Matrix6Xd J = jacobian(chain, s.q);
  const Matrix6Xd Jd = jacobian_dot(chain, s.q, s.qd);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(12, 2 * n);
  B.block(0, 0, 6, n) = J;
  B.block(6, 0, 6, n) = Jd;
  B.block(6, n, 6, n) = J;
  return B;
}

KinematicMaps kinematic_maps(const ChainModel& chain, const JointState& s) {
  KinematicMaps maps;
  maps.J = jacobian(chain, s.q);
  maps.Jdot = jacobian_dot(chain, s.q, s.qd);
  const int n = chain.dof();
  maps.B_kin = Eigen::MatrixXd::Zero(12, 2 * n);
  maps.B_kin.block(0, 0, 6, n) = maps.J;
  maps.B_kin.block(6, 0, 6, n) = maps.Jdot;
  maps.B_kin.block(6, n, 6, n) = maps.J;
  return maps;
}

Eigen::Matrix<double, 13, 12> build_b_e(const Eigen::Vector4d& o, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("build_b_e: dt must be positive");
  }
  Eigen::Matrix<double, 13, 12> B = Eigen::Matrix<double, 13, 12>::Zero();
  B.block<3, 3>(0, 0) = dt * Eigen::Matrix3d::Identity();
  B.block<4, 3>(3, 3) = 0.5 * dt * quat_rate_matrix(o);
  B.block<3, 3>(7, 6) = dt * Eigen::Matrix3d::Identity();
  B.block<3, 3>(10, 9) = dt * Eigen::Matrix3d::Identity();
  return B;
}

EndEffectorState end_effector_state(const ChainModel& chain,
                                    const JointState& s) {
  const auto [p, R] = forward_kinematics(chain, s.q);
  const Matrix6Xd J = jacobian(chain, s.q);
  const Vector6d twist = J * s.qd;
  EndEffectorState x;
  x.p = p;
  x.o = quat_from_rotation(R);
  x.pd = twist.head<3>();
  x.w = twist.tail<3>();
  return x;
}

}  // namespace hmpc
