#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <utility>

#include "hmpc/chain.hpp"
#include "hmpc/qp.hpp"

namespace hmpc {

/// Tracking weights. Q blocks order: position, orientation, linear
/// velocity, angular velocity (3 each). P is the binary task-priority
/// selector over (position x/y/z, orientation x/y/z).
struct ControllerWeights {
  Eigen::Matrix<double, 12, 12> Q = Eigen::Matrix<double, 12, 12>::Identity();
  Eigen::MatrixXd R;
  Vector6d P = (Vector6d() << 1, 1, 1, 0, 0, 0).finished();

  /// Position 1e3, orientation 1e2, velocity blocks 1, R = 1e-2 I,
  /// position-priority selector.
  static ControllerWeights defaults(int n_joints);
};

struct HorizonConfig {
  int N = 10;    // baseline MPC horizon
  int N_h = 10;  // high-level horizon
  int N_l = 10;  // low-level horizon, N_l <= N_h
  double dt = 0.01;
};

struct JointLimits {
  Eigen::VectorXd q_lower, q_upper;
  Eigen::VectorXd qd_max, qdd_max;

  static JointLimits from_chain(const ChainModel& chain);
};

/// High-level joint-space rollout over the horizon: positions and
/// velocities integrated from the input sequence with the same recursion
/// the simulated plant uses.
struct JointPrediction {
  Eigen::MatrixXd q_seq;   // (N+1) x n_j
  Eigen::MatrixXd qd_seq;  // (N+1) x n_j
  Eigen::MatrixXd u_seq;   // N x 2*n_j, [qd_cmd, qdd_cmd] per row

  int steps() const { return static_cast<int>(u_seq.rows()); }
};

struct ControlOutput {
  Eigen::VectorXd u;  // first-step [qd_cmd, qdd_cmd]
  Eigen::VectorXd u_sequence;  // full stacked horizon solution (empty on failure)
  double predicted_cost = 0.0;
  QPStatus qp_status = QPStatus::max_iter;
  double solve_time = 0.0;  // seconds, total

  // Hierarchical bookkeeping (zero / optimal for the one-level schemes).
  double high_level_time = 0.0;
  double rollout_time = 0.0;
  double low_level_time = 0.0;
  QPStatus high_status = QPStatus::optimal;
  QPStatus low_status = QPStatus::optimal;
  bool coupling_softened = false;
};

/// Integrate the commanded [qd, qdd] sequence (stacked step-major) from
/// (q0, qd0): q+ = q + qd_cmd*dt + 0.5*qdd_cmd*dt^2, qd+ = qd_cmd + qdd_cmd*dt.
JointPrediction rollout_prediction(const Eigen::VectorXd& q0,
                                   const Eigen::VectorXd& qd0,
                                   const Eigen::VectorXd& u_stacked, int steps,
                                   double dt);

/// Condensed MPC QP over the stacked inputs u_1..u_N with B_kin frozen at
/// (q0, qd0) and the quaternion block of the integration map propagated
/// per step at the current angular velocity. Costs per the weights;
/// constraints: accumulated position rows, velocity and acceleration
/// boxes. ref must hold at least N+1 samples starting at the current one.
QPProblem build_mpc_qp(const KinematicMaps& maps, const EndEffectorState& x0,
                       const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                       std::span<const EndEffectorState> ref,
                       const ControllerWeights& w, const HorizonConfig& h,
                       const JointLimits& lim);

/// Single MPC with a high/low gain split from P (secondary weights scaled
/// by secondary_ratio). Solves over h.N and returns the first input.
ControlOutput weighted_mpc_step(const KinematicMaps& maps,
                                const EndEffectorState& x0,
                                const Eigen::VectorXd& q0,
                                const Eigen::VectorXd& qd0,
                                std::span<const EndEffectorState> ref,
                                const ControllerWeights& w,
                                const HorizonConfig& h, const JointLimits& lim,
                                QPSolver& solver,
                                const std::optional<Eigen::VectorXd>& warm = {},
                                double secondary_ratio = 0.01);

/// High-priority-only MPC over h.N_h plus the joint-space rollout of its
/// input sequence. A failed solve degenerates to the zero-input rollout.
std::pair<ControlOutput, JointPrediction> high_level_step(
    const KinematicMaps& maps, const EndEffectorState& x0,
    const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
    std::span<const EndEffectorState> ref, const ControllerWeights& w,
    const HorizonConfig& h, const JointLimits& lim, QPSolver& solver,
    const std::optional<Eigen::VectorXd>& warm = {});

/// Re-linearized MPC over h.N_l: B_kin per step from the predicted joint
/// states, full task cost, and P-selected task-velocity equality rows
/// tying each step to the high-level input. Infeasible coupling falls
/// back to a high-weight penalty once.
ControlOutput low_level_step(const ChainModel& chain, const EndEffectorState& x0,
                             const Eigen::VectorXd& q0,
                             const Eigen::VectorXd& qd0,
                             std::span<const EndEffectorState> ref,
                             const ControllerWeights& w, const HorizonConfig& h,
                             const JointLimits& lim, const JointPrediction& pred,
                             QPSolver& solver,
                             const std::optional<Eigen::VectorXd>& warm = {});

/// Single-step special case (N = 1) of the weighted MPC.
ControlOutput hqp_step(const KinematicMaps& maps, const EndEffectorState& x0,
                       const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                       std::span<const EndEffectorState> ref,
                       const ControllerWeights& w, const HorizonConfig& h,
                       const JointLimits& lim, QPSolver& solver,
                       const std::optional<Eigen::VectorXd>& warm = {});

/// Full hierarchical step: high level, rollout, low level; returns the
/// low-level first input with per-stage statuses and timings.
ControlOutput hmpc_step(const ChainModel& chain, const EndEffectorState& x0,
                        const JointState& s,
                        std::span<const EndEffectorState> ref,
                        const ControllerWeights& w, const HorizonConfig& h,
                        const JointLimits& lim, QPSolver& solver_high,
                        QPSolver& solver_low,
                        const std::optional<Eigen::VectorXd>& warm_high = {},
                        const std::optional<Eigen::VectorXd>& warm_low = {},
                        JointPrediction* prediction_out = nullptr);

namespace detail {
/// diag selector from the 6-dim pattern lifted to the 12 weight rows
/// (pose pattern mirrored onto the matching velocity rows).
Eigen::Matrix<double, 12, 12> priority_scaled_weight(
    const Eigen::Matrix<double, 12, 12>& Q, const Vector6d& P,
    double secondary_ratio);

/// 12-dim weight lifted to the 13-dim state error; the quaternion block
/// carries the orientation weights on the vector rows and their mean on
/// the scalar row.
Eigen::Matrix<double, 13, 13> lift_weight(const Eigen::Matrix<double, 12, 12>& Q);
}  // namespace detail

}  // namespace hmpc
