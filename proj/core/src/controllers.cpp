#include "hmpc/controllers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace hmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

Eigen::Vector4d propagate_quat(const Eigen::Vector4d& o,
                               const Eigen::Vector3d& w, double dt) {
  // No sign canonicalization here: the horizon model must stay smooth.
  Eigen::Vector4d next = o + 0.5 * dt * (quat_rate_matrix(o) * w);
  return next / next.norm();
}

Eigen::Vector4d align_to(const Eigen::Vector4d& o, const Eigen::Vector4d& anchor) {
  return (o.dot(anchor) < 0.0) ? Eigen::Vector4d(-o) : o;
}

struct CouplingBlock {
  Eigen::MatrixXd A;    // rows x (2*n_j*N)
  Eigen::VectorXd rhs;  // equality targets
};

// Condensed QP over stacked inputs. b_kins has one entry per step (or a
// single entry reused when frozen). pos_base, when given, replaces q0 as
// the constant part of the accumulated-position rows.
QPProblem assemble_horizon_qp(const std::vector<Eigen::MatrixXd>& b_kins,
                              const std::vector<Eigen::Vector4d>& quats,
                              const EndEffectorState& x0,
                              const Eigen::VectorXd& q0,
                              std::span<const EndEffectorState> ref,
                              const Eigen::Matrix<double, 13, 13>& W,
                              const Eigen::MatrixXd& R, int N, double dt,
                              const JointLimits& lim,
                              const Eigen::MatrixXd* pos_base,
                              const Eigen::VectorXd* pos_margin_scale,
                              const CouplingBlock* coupling,
                              double* cost_constant) {
  const int nj = static_cast<int>(q0.size());
  const int nu = 2 * nj;
  const int n = nu * N;
  if (static_cast<int>(ref.size()) < N + 1) {
    throw std::invalid_argument("mpc: reference window shorter than N+1");
  }
  if (lim.q_lower.size() != nj || lim.qd_max.size() != nj ||
      lim.qdd_max.size() != nj || lim.q_upper.size() != nj) {
    throw std::invalid_argument("mpc: limit vectors do not match chain DoF");
  }
  if (R.rows() != nu || R.cols() != nu) {
    throw std::invalid_argument("mpc: R must be 2*n_j square");
  }

  // Per-step increment maps M_k = B_e(o_k) * B_kin_k.
  std::vector<Eigen::MatrixXd> M(N);
  for (int k = 0; k < N; ++k) {
    const Eigen::MatrixXd& Bk = b_kins[b_kins.size() == 1 ? 0 : k];
    M[k] = build_b_e(quats[k], dt) * Bk;
  }

  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(13 * N, n);
  for (int j = 0; j < N; ++j) {
    for (int k = 0; k <= j; ++k) {
      T.block(13 * j, nu * k, 13, nu) = M[k];
    }
  }
  Eigen::VectorXd ebar(13 * N);
  const Eigen::Matrix<double, 13, 1> x0v = x0.vector();
  for (int j = 0; j < N; ++j) {
    EndEffectorState r = ref[j + 1];
    r.o = align_to(r.o, x0.o);
    ebar.segment<13>(13 * j) = x0v - r.vector();
  }
  Eigen::MatrixXd WT(13 * N, n);
  for (int j = 0; j < N; ++j) {
    WT.middleRows(13 * j, 13).noalias() = W * T.middleRows(13 * j, 13);
  }

  QPProblem p;
  p.H = 2.0 * (T.transpose() * WT);
  for (int k = 0; k < N; ++k) {
    p.H.block(nu * k, nu * k, nu, nu) += 2.0 * R;
  }
  p.H = 0.5 * (p.H + p.H.transpose());
  p.g = 2.0 * (WT.transpose() * ebar);
  if (cost_constant) {
    double c = 0.0;
    for (int j = 0; j < N; ++j) {
      const auto e = ebar.segment<13>(13 * j);
      c += e.dot(W * e);
    }
    *cost_constant = c;
  }

  p.lb = Eigen::VectorXd::Constant(n, -kInf);
  p.ub = Eigen::VectorXd::Constant(n, kInf);
  for (int k = 0; k < N; ++k) {
    p.lb.segment(nu * k, nj) = -lim.qd_max;
    p.ub.segment(nu * k, nj) = lim.qd_max;
    p.lb.segment(nu * k + nj, nj) = -lim.qdd_max;
    p.ub.segment(nu * k + nj, nj) = lim.qdd_max;
  }

  // Accumulated-position rows: q_l <= base_j + dt * sum qd_k <= q_u,
  // tightened by the worst-case contribution of the half-dt^2 terms the
  // row form omits, so the true one-step update stays inside the box.
  const int m_pos = N * nj;
  const int m_cp = coupling ? static_cast<int>(coupling->rhs.size()) : 0;
  p.A = Eigen::MatrixXd::Zero(m_pos + m_cp, n);
  p.lbA.resize(m_pos + m_cp);
  p.ubA.resize(m_pos + m_cp);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < nj; ++i) {
      const int row = j * nj + i;
      for (int k = 0; k <= j; ++k) {
        p.A(row, nu * k + i) = dt;
      }
      const double base = pos_base ? (*pos_base)(j, i) : q0(i);
      const double scale = pos_margin_scale ? (*pos_margin_scale)(0) : 0.5;
      const double margin = (j + 1) * scale * dt * dt * lim.qdd_max(i);
      double lo = lim.q_lower(i) - base + margin;
      double hi = lim.q_upper(i) - base - margin;
      if (lo > hi) {  // degenerate box, fall back to the midpoint
        lo = hi = 0.5 * (lo + hi);
      }
      p.lbA(row) = lo;
      p.ubA(row) = hi;
    }
  }
  if (coupling) {
    p.A.bottomRows(m_cp) = coupling->A;
    p.lbA.tail(m_cp) = coupling->rhs;
    p.ubA.tail(m_cp) = coupling->rhs;
  }
  return p;
}

std::vector<Eigen::Vector4d> constant_rate_quats(const EndEffectorState& x0,
                                                 int N, double dt) {
  std::vector<Eigen::Vector4d> quats(N);
  Eigen::Vector4d o = x0.o;
  for (int k = 0; k < N; ++k) {
    quats[k] = o;
    o = propagate_quat(o, x0.w, dt);
  }
  return quats;
}

ControlOutput solve_into_output(QPSolver& solver, const QPProblem& p,
                                const std::optional<Eigen::VectorXd>& warm,
                                int nu, double cost_constant) {
  ControlOutput out;
  const QPSolution sol = solver.solve(p, warm);
  out.qp_status = sol.status;
  out.solve_time = sol.solve_time;
  out.predicted_cost = sol.objective + cost_constant;
  if (sol.status == QPStatus::optimal) {
    out.u = sol.x.head(nu);
    out.u_sequence = sol.x;
  } else {
    out.u = Eigen::VectorXd::Zero(nu);
  }
  return out;
}

}  // namespace

ControllerWeights ControllerWeights::defaults(int n_joints) {
  ControllerWeights w;
  w.Q.setZero();
  w.Q.block<3, 3>(0, 0) = 1e3 * Eigen::Matrix3d::Identity();
  w.Q.block<3, 3>(3, 3) = 1e2 * Eigen::Matrix3d::Identity();
  w.Q.block<3, 3>(6, 6) = Eigen::Matrix3d::Identity();
  w.Q.block<3, 3>(9, 9) = Eigen::Matrix3d::Identity();
  w.R = 1e-2 * Eigen::MatrixXd::Identity(2 * n_joints, 2 * n_joints);
  w.P << 1, 1, 1, 0, 0, 0;
  return w;
}

JointLimits JointLimits::from_chain(const ChainModel& chain) {
  const int n = chain.dof();
  JointLimits lim;
  lim.q_lower.resize(n);
  lim.q_upper.resize(n);
  lim.qd_max.resize(n);
  lim.qdd_max.resize(n);
  for (int i = 0; i < n; ++i) {
    lim.q_lower(i) = chain.modules[i].q_lower;
    lim.q_upper(i) = chain.modules[i].q_upper;
    lim.qd_max(i) = chain.modules[i].qd_limit;
    lim.qdd_max(i) = chain.modules[i].qdd_limit;
  }
  return lim;
}

namespace detail {

Eigen::Matrix<double, 12, 12> priority_scaled_weight(
    const Eigen::Matrix<double, 12, 12>& Q, const Vector6d& P,
    double secondary_ratio) {
  Eigen::Matrix<double, 12, 1> pattern;
  for (int i = 0; i < 6; ++i) {
    const double s = (P(i) != 0.0) ? 1.0 : secondary_ratio;
    pattern(i) = s;      // pose rows
    pattern(6 + i) = s;  // matching velocity rows
  }
  const Eigen::Matrix<double, 12, 1> sq = pattern.cwiseSqrt();
  return sq.asDiagonal() * Q * sq.asDiagonal();
}

Eigen::Matrix<double, 13, 13> lift_weight(
    const Eigen::Matrix<double, 12, 12>& Q) {
  Eigen::Matrix<double, 13, 13> W = Eigen::Matrix<double, 13, 13>::Zero();
  W.block<3, 3>(0, 0) = Q.block<3, 3>(0, 0);
  W.block<3, 3>(4, 4) = Q.block<3, 3>(3, 3);           // quaternion vector rows
  W(3, 3) = Q.block<3, 3>(3, 3).diagonal().mean();     // quaternion scalar row
  W.block<3, 3>(7, 7) = Q.block<3, 3>(6, 6);
  W.block<3, 3>(10, 10) = Q.block<3, 3>(9, 9);
  return W;
}

}  // namespace detail

JointPrediction rollout_prediction(const Eigen::VectorXd& q0,
                                   const Eigen::VectorXd& qd0,
                                   const Eigen::VectorXd& u_stacked, int steps,
                                   double dt) {
  const int nj = static_cast<int>(q0.size());
  const int nu = 2 * nj;
  JointPrediction pred;
  pred.q_seq.resize(steps + 1, nj);
  pred.qd_seq.resize(steps + 1, nj);
  pred.u_seq.resize(steps, nu);
  pred.q_seq.row(0) = q0.transpose();
  pred.qd_seq.row(0) = qd0.transpose();
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd u = u_stacked.segment(nu * k, nu);
    pred.u_seq.row(k) = u.transpose();
    const auto qd_cmd = u.head(nj);
    const auto qdd_cmd = u.tail(nj);
    pred.q_seq.row(k + 1) = pred.q_seq.row(k) +
                            dt * qd_cmd.transpose() +
                            0.5 * dt * dt * qdd_cmd.transpose();
    pred.qd_seq.row(k + 1) = (qd_cmd + dt * qdd_cmd).transpose();
  }
  return pred;
}

QPProblem build_mpc_qp(const KinematicMaps& maps, const EndEffectorState& x0,
                       const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                       std::span<const EndEffectorState> ref,
                       const ControllerWeights& w, const HorizonConfig& h,
                       const JointLimits& lim) {
  (void)qd0;  // linearization state is already baked into maps
  const std::vector<Eigen::MatrixXd> b_kins{maps.B_kin};
  return assemble_horizon_qp(b_kins, constant_rate_quats(x0, h.N, h.dt), x0, q0,
                             ref, detail::lift_weight(w.Q), w.R, h.N, h.dt, lim,
                             nullptr, nullptr, nullptr, nullptr);
}

ControlOutput weighted_mpc_step(const KinematicMaps& maps,
                                const EndEffectorState& x0,
                                const Eigen::VectorXd& q0,
                                const Eigen::VectorXd& qd0,
                                std::span<const EndEffectorState> ref,
                                const ControllerWeights& w,
                                const HorizonConfig& h, const JointLimits& lim,
                                QPSolver& solver,
                                const std::optional<Eigen::VectorXd>& warm,
                                double secondary_ratio) {
  (void)qd0;
  const int nu = 2 * static_cast<int>(q0.size());
  const Eigen::Matrix<double, 13, 13> W = detail::lift_weight(
      detail::priority_scaled_weight(w.Q, w.P, secondary_ratio));
  const std::vector<Eigen::MatrixXd> b_kins{maps.B_kin};
  double c = 0.0;
  const QPProblem p =
      assemble_horizon_qp(b_kins, constant_rate_quats(x0, h.N, h.dt), x0, q0,
                          ref, W, w.R, h.N, h.dt, lim, nullptr, nullptr,
                          nullptr, &c);
  return solve_into_output(solver, p, warm, nu, c);
}

std::pair<ControlOutput, JointPrediction> high_level_step(
    const KinematicMaps& maps, const EndEffectorState& x0,
    const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
    std::span<const EndEffectorState> ref, const ControllerWeights& w,
    const HorizonConfig& h, const JointLimits& lim, QPSolver& solver,
    const std::optional<Eigen::VectorXd>& warm) {
  const int nj = static_cast<int>(q0.size());
  const int nu = 2 * nj;
  int active = 0;
  for (int i = 0; i < 6; ++i) active += (w.P(i) != 0.0) ? 1 : 0;
  if (active >= nj) {
    throw std::invalid_argument(
        "high_level_step: high-priority task count must be below the DoF");
  }
  const Eigen::Matrix<double, 13, 13> W1 =
      detail::lift_weight(detail::priority_scaled_weight(w.Q, w.P, 0.0));
  const std::vector<Eigen::MatrixXd> b_kins{maps.B_kin};
  double c = 0.0;
  const QPProblem p =
      assemble_horizon_qp(b_kins, constant_rate_quats(x0, h.N_h, h.dt), x0, q0,
                          ref, W1, w.R, h.N_h, h.dt, lim, nullptr, nullptr,
                          nullptr, &c);
  const QPSolution sol = solver.solve(p, warm);

  ControlOutput out;
  out.qp_status = sol.status;
  out.solve_time = sol.solve_time;
  out.predicted_cost = sol.objective + c;
  const Eigen::VectorXd u_full = (sol.status == QPStatus::optimal)
                                     ? sol.x
                                     : Eigen::VectorXd::Zero(nu * h.N_h);
  out.u = u_full.head(nu);
  if (sol.status == QPStatus::optimal) out.u_sequence = sol.x;
  JointPrediction pred = rollout_prediction(q0, qd0, u_full, h.N_h, h.dt);
  return {out, pred};
}

ControlOutput low_level_step(const ChainModel& chain, const EndEffectorState& x0,
                             const Eigen::VectorXd& q0,
                             const Eigen::VectorXd& qd0,
                             std::span<const EndEffectorState> ref,
                             const ControllerWeights& w, const HorizonConfig& h,
                             const JointLimits& lim, const JointPrediction& pred,
                             QPSolver& solver,
                             const std::optional<Eigen::VectorXd>& warm) {
  (void)qd0;
  const int nj = chain.dof();
  const int nu = 2 * nj;
  const int N = h.N_l;
  if (pred.steps() < N) {
    throw std::invalid_argument("low_level_step: prediction shorter than N_l");
  }

  // Re-linearize along the predicted joint trajectory.
  std::vector<Eigen::MatrixXd> b_kins(N);
  std::vector<Eigen::Vector4d> quats(N);
  Eigen::Vector4d anchor = x0.o;
  for (int k = 0; k < N; ++k) {
    JointState sk{pred.q_seq.row(k).transpose(), pred.qd_seq.row(k).transpose()};
    b_kins[k] = build_b_kin(chain, sk);
    const auto [pk, Rk] = forward_kinematics(chain, sk.q);
    (void)pk;
    quats[k] = align_to(quat_from_rotation(Rk), anchor);
    anchor = quats[k];
  }

  // Task-velocity coupling on the P-selected rows, every horizon step.
  std::vector<int> sel;
  for (int i = 0; i < 6; ++i)
    if (w.P(i) != 0.0) sel.push_back(i);
  CouplingBlock coupling;
  const int m_cp = static_cast<int>(sel.size()) * N;
  coupling.A = Eigen::MatrixXd::Zero(m_cp, nu * N);
  coupling.rhs.resize(m_cp);
  for (int k = 0; k < N; ++k) {
    const Eigen::VectorXd u1 = pred.u_seq.row(k).transpose();
    for (std::size_t r = 0; r < sel.size(); ++r) {
      const int row = k * static_cast<int>(sel.size()) + static_cast<int>(r);
      coupling.A.block(row, nu * k, 1, nu) = b_kins[k].row(sel[r]);
      coupling.rhs(row) = b_kins[k].row(sel[r]).dot(u1);
    }
  }

  // Position-row base propagated with the predicted accelerations; the
  // margin covers the command-vs-prediction acceleration gap.
  Eigen::MatrixXd pos_base(N, nj);
  Eigen::VectorXd acc_sum = Eigen::VectorXd::Zero(nj);
  for (int j = 0; j < N; ++j) {
    acc_sum += pred.u_seq.row(j).tail(nj).transpose();
    pos_base.row(j) = q0.transpose() + 0.5 * h.dt * h.dt * acc_sum.transpose();
  }
  Eigen::VectorXd margin_scale(1);
  margin_scale(0) = 1.0;

  const Eigen::Matrix<double, 13, 13> W2 = detail::lift_weight(w.Q);
  double c = 0.0;
  QPProblem p = assemble_horizon_qp(b_kins, quats, x0, q0, ref, W2, w.R, N,
                                    h.dt, lim, &pos_base, &margin_scale,
                                    &coupling, &c);
  ControlOutput out = solve_into_output(solver, p, warm, nu, c);
  if (out.qp_status == QPStatus::infeasible && m_cp > 0) {
    // Soften the coupling into a high-weight penalty and retry once.
    QPProblem soft = assemble_horizon_qp(b_kins, quats, x0, q0, ref, W2, w.R, N,
                                         h.dt, lim, &pos_base, &margin_scale,
                                         nullptr, &c);
    constexpr double kPenalty = 1e6;
    soft.H += 2.0 * kPenalty * coupling.A.transpose() * coupling.A;
    soft.H = 0.5 * (soft.H + soft.H.transpose());
    soft.g -= 2.0 * kPenalty * coupling.A.transpose() * coupling.rhs;
    const double t_first = out.solve_time;
    out = solve_into_output(solver, soft, warm, nu, c);
    out.solve_time += t_first;
    out.coupling_softened = true;
  }
  return out;
}

ControlOutput hqp_step(const KinematicMaps& maps, const EndEffectorState& x0,
                       const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                       std::span<const EndEffectorState> ref,
                       const ControllerWeights& w, const HorizonConfig& h,
                       const JointLimits& lim, QPSolver& solver,
                       const std::optional<Eigen::VectorXd>& warm) {
  HorizonConfig h1 = h;
  h1.N = 1;
  return weighted_mpc_step(maps, x0, q0, qd0, ref.first(2), w, h1, lim, solver,
                           warm);
}

ControlOutput hmpc_step(const ChainModel& chain, const EndEffectorState& x0,
                        const JointState& s,
                        std::span<const EndEffectorState> ref,
                        const ControllerWeights& w, const HorizonConfig& h,
                        const JointLimits& lim, QPSolver& solver_high,
                        QPSolver& solver_low,
                        const std::optional<Eigen::VectorXd>& warm_high,
                        const std::optional<Eigen::VectorXd>& warm_low,
                        JointPrediction* prediction_out) {
  const auto t0 = std::chrono::steady_clock::now();
  const KinematicMaps maps = kinematic_maps(chain, s);
  auto [high, pred] = high_level_step(maps, x0, s.q, s.qd, ref, w, h, lim,
                                      solver_high, warm_high);
  const double t_high = seconds_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  ControlOutput out = low_level_step(chain, x0, s.q, s.qd, ref, w, h, lim, pred,
                                     solver_low, warm_low);
  const double t_low = seconds_since(t1);

  out.high_status = high.qp_status;
  out.low_status = out.qp_status;
  if (high.qp_status != QPStatus::optimal) {
    out.qp_status = high.qp_status;
  }
  out.high_level_time = high.solve_time;
  out.rollout_time = std::max(t_high - high.solve_time, 0.0);
  out.low_level_time = t_low;
  out.solve_time = seconds_since(t0);
  if (prediction_out) *prediction_out = pred;
  return out;
}

}  // namespace hmpc
