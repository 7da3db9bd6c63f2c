#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <utility>
#include <vector>

#include "hmpc/so3.hpp"

namespace hmpc {

/// Rigid transform (rotation + translation). Thin wrapper instead of
/// Eigen::Isometry3d so invariants can be validated explicitly.
struct RigidTransform {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d p = Eigen::Vector3d::Zero();

  RigidTransform operator*(const RigidTransform& o) const {
    return {R * o.R, R * o.p + p};
  }
  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return R * v + p; }
  static RigidTransform Identity() { return {}; }
};

/// One revolute joint module: rotation axis in the module's local frame,
/// fixed transform from the parent frame, and motion limits.
struct JointModule {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  RigidTransform parent_transform;
  double q_lower = -2.75;  // rad
  double q_upper = 2.75;   // rad
  double qd_limit = 2.0;   // rad/s
  double qdd_limit = 0.5;  // rad/s^2
};

/// Serial chain of revolute modules with base and tool transforms.
struct ChainModel {
  std::vector<JointModule> modules;
  RigidTransform base_transform;
  RigidTransform tool_transform;

  int dof() const { return static_cast<int>(modules.size()); }
};

struct JointState {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
};

/// 13-dim end-effector state [p, o, pd, w] with o a scalar-first unit
/// quaternion (canonical sign: scalar >= 0) and w the world-frame
/// angular velocity.
struct EndEffectorState {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector4d o = Eigen::Vector4d(1, 0, 0, 0);
  Eigen::Vector3d pd = Eigen::Vector3d::Zero();
  Eigen::Vector3d w = Eigen::Vector3d::Zero();

  Eigen::Matrix<double, 13, 1> vector() const {
    Eigen::Matrix<double, 13, 1> x;
    x << p, o, pd, w;
    return x;
  }
};

/// Jacobian-level maps at a joint state. B_kin is the stacked
/// [[J, 0], [Jdot, J]] from [qd, qdd] to [pd, w, pdd, wd].
struct KinematicMaps {
  Matrix6Xd J;
  Matrix6Xd Jdot;
  Eigen::MatrixXd B_kin;  // 12 x 2*n_j
};

/// End-effector pose of the chain at joint positions q.
std::pair<Eigen::Vector3d, Eigen::Matrix3d> forward_kinematics(
    const ChainModel& chain, const Eigen::VectorXd& q);

/// Geometric Jacobian, world frame, linear rows on top. Column i is
/// (z_i x (p_e - p_i), z_i).
Matrix6Xd jacobian(const ChainModel& chain, const Eigen::VectorXd& q);

/// Analytic time derivative of the geometric Jacobian via velocity
/// propagation along the chain.
Matrix6Xd jacobian_dot(const ChainModel& chain, const Eigen::VectorXd& q,
                       const Eigen::VectorXd& qd);

/// [[J, 0], [Jdot, J]] at the given state.
Eigen::MatrixXd build_b_kin(const ChainModel& chain, const JointState& s);

KinematicMaps kinematic_maps(const ChainModel& chain, const JointState& s);

/// Forward-Euler increment map from [pd, w, pdd, wd] to the 13-dim state
/// increment: blockdiag(I*dt, 0.5*G(o)*dt, I*dt, I*dt). The quaternion
/// block is 4x3, so the map is 13x12.
Eigen::Matrix<double, 13, 12> build_b_e(const Eigen::Vector4d& o, double dt);

/// Pose from FK plus twist (pd, w) = J(q)*qd.
EndEffectorState end_effector_state(const ChainModel& chain, const JointState& s);

namespace detail {
/// World-frame joint origins, joint axes, and end-effector position for
/// one FK pass; shared by the Jacobian routines.
struct FramePass {
  std::vector<Eigen::Vector3d> origin;  // joint origins p_i
  std::vector<Eigen::Vector3d> axis;    // world joint axes z_i
  Eigen::Vector3d p_e;
  Eigen::Matrix3d R_e;
};
FramePass frame_pass(const ChainModel& chain, const Eigen::VectorXd& q);
}  // namespace detail

}  // namespace hmpc
