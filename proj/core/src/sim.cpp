#include "hmpc/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "hmpc/morphology.hpp"

namespace hmpc {

namespace {

double steady_seconds(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// Shift a stacked horizon solution one step: drop the first input,
// duplicate the last.
Eigen::VectorXd shift_warm(const Eigen::VectorXd& u_seq, int nu) {
  if (u_seq.size() < nu) return u_seq;
  Eigen::VectorXd out(u_seq.size());
  out.head(u_seq.size() - nu) = u_seq.tail(u_seq.size() - nu);
  out.tail(nu) = u_seq.tail(nu);
  return out;
}

Eigen::VectorXd stack_rows(const Eigen::MatrixXd& m) {
  Eigen::VectorXd out(m.size());
  for (int r = 0; r < m.rows(); ++r) {
    out.segment(r * m.cols(), m.cols()) = m.row(r).transpose();
  }
  return out;
}

Eigen::VectorXd stock_start_posture(const std::string& morphology) {
  if (morphology == "A") {
    return (Eigen::VectorXd(4) << 0.0, 0.9, -0.7, 0.5).finished();
  }
  if (morphology == "B") {
    return (Eigen::VectorXd(5) << 0.0, 1.0, -0.7, 0.0, 0.5).finished();
  }
  if (morphology == "C") {
    return (Eigen::VectorXd(5) << 0.9, 0.0, -0.5, 0.4, 0.0).finished();
  }
  if (morphology == "D") {
    return (Eigen::VectorXd(6) << 0.0, 1.0, -0.7, 0.0, 0.5, -0.3).finished();
  }
  return (Eigen::VectorXd(6) << 0.0, 1.1, -0.8, 0.0, 0.6, 0.0).finished();
}

}  // namespace

const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::hmpc: return "hmpc";
    case ControllerKind::weighted_mpc: return "mpc";
    case ControllerKind::hqp: return "hqp";
  }
  return "unknown";
}

std::optional<ControllerKind> controller_kind_from_string(const std::string& s) {
  if (s == "hmpc") return ControllerKind::hmpc;
  if (s == "mpc" || s == "weighted_mpc") return ControllerKind::weighted_mpc;
  if (s == "hqp") return ControllerKind::hqp;
  return std::nullopt;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> integrate_joints(
    const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
    const Eigen::VectorXd& u, double dt) {
  const int nj = static_cast<int>(q.size());
  if (qd.size() != nj || u.size() != 2 * nj) {
    throw std::invalid_argument("integrate_joints: dimension mismatch");
  }
  const auto qd_cmd = u.head(nj);
  const auto qdd_cmd = u.tail(nj);
  Eigen::VectorXd q_next = q + dt * qd_cmd + 0.5 * dt * dt * qdd_cmd;
  Eigen::VectorXd qd_next = qd_cmd + dt * qdd_cmd;
  return {std::move(q_next), std::move(qd_next)};
}

ExecutionLog run_closed_loop(const Scenario& sc) {
  const int nj = sc.chain.dof();
  const int nu = 2 * nj;
  if (sc.q0.size() != nj || sc.qd0.size() != nj) {
    throw std::invalid_argument("run_closed_loop: initial state dimension mismatch");
  }
  const JointLimits lim = JointLimits::from_chain(sc.chain);
  const double dt = sc.horizons.dt;

  // Trajectory generation happens before the loop; failures propagate.
  const auto [p0, R0] = forward_kinematics(sc.chain, sc.q0);
  (void)p0;
  const PositionTrajectory ptraj =
      fit_position_trajectory(sc.waypoints, sc.v_max, sc.a_max);
  const OrientationTrajectory otraj =
      make_orientation_trajectory(R0, sc.R_goal, ptraj.total_duration());
  ExecutionLog log;
  log.scenario = sc;
  log.reference = build_reference(ptraj, otraj, dt);

  const int horizon = std::max(sc.horizons.N, sc.horizons.N_h);
  std::vector<EndEffectorState> padded = log.reference.samples;
  padded.insert(padded.end(), horizon + 1, padded.back());

  const int n_cycles =
      static_cast<int>(std::ceil(ptraj.total_duration() / dt - 1e-9));
  log.cycles.reserve(n_cycles);

  QPSolver solver_a, solver_b;
  std::optional<Eigen::VectorXd> warm_a, warm_b;
  Eigen::VectorXd q = sc.q0, qd = sc.qd0;
  Eigen::VectorXd prev_u = Eigen::VectorXd::Zero(nu);
  int consecutive_failures = 0;

  for (int k = 0; k < n_cycles; ++k) {
    const JointState s{q, qd};
    const EndEffectorState x = end_effector_state(sc.chain, s);
    const std::span<const EndEffectorState> window(padded.data() + k,
                                                   padded.size() - k);
    const auto t0 = std::chrono::steady_clock::now();
    ControlOutput out;
    JointPrediction pred;
    switch (sc.controller) {
      case ControllerKind::hmpc:
        out = hmpc_step(sc.chain, x, s, window, sc.weights, sc.horizons, lim,
                        solver_a, solver_b, warm_a, warm_b, &pred);
        break;
      case ControllerKind::weighted_mpc: {
        const KinematicMaps maps = kinematic_maps(sc.chain, s);
        out = weighted_mpc_step(maps, x, q, qd, window, sc.weights, sc.horizons,
                                lim, solver_a, warm_a);
        out.solve_time = steady_seconds(t0);
        break;
      }
      case ControllerKind::hqp: {
        const KinematicMaps maps = kinematic_maps(sc.chain, s);
        out = hqp_step(maps, x, q, qd, window, sc.weights, sc.horizons, lim,
                       solver_a, warm_a);
        out.solve_time = steady_seconds(t0);
        break;
      }
    }

    CycleRecord rec;
    rec.t = k * dt;
    rec.q = q;
    rec.qd = qd;
    rec.x = x;
    rec.x_ref = log.reference.at(k);
    rec.qp_status = out.qp_status;
    rec.solve_time = out.solve_time;

    Eigen::VectorXd u_apply;
    if (out.qp_status == QPStatus::optimal) {
      u_apply = out.u;
      consecutive_failures = 0;
      rec.fallback = 0;
    } else {
      ++consecutive_failures;
      if (consecutive_failures <= 10) {
        u_apply = prev_u;
        rec.fallback = 1;
      } else {
        u_apply = Eigen::VectorXd::Zero(nu);
        rec.fallback = 2;
      }
    }
    rec.u = u_apply;

    rec.e_p = (x.p - rec.x_ref.p).cwiseAbs();
    const Eigen::Matrix3d R = rotation_from_quat(x.o);
    const Eigen::Matrix3d R_ref = rotation_from_quat(rec.x_ref.o);
    rec.e_o = log_so3(R * R_ref.transpose()).cwiseAbs();
    log.cycles.push_back(std::move(rec));

    std::tie(q, qd) = integrate_joints(q, qd, u_apply, dt);
    prev_u = u_apply;
    if (out.qp_status == QPStatus::optimal) {
      switch (sc.controller) {
        case ControllerKind::hmpc:
          warm_a = shift_warm(stack_rows(pred.u_seq), nu);
          warm_b = shift_warm(out.u_sequence, nu);
          break;
        default:
          warm_a = shift_warm(out.u_sequence, nu);
          break;
      }
    }
  }
  return log;
}

Eigen::MatrixXd tracking_errors(const ExecutionLog& log) {
  if (log.cycles.empty()) {
    throw std::invalid_argument("tracking_errors: empty log");
  }
  Eigen::MatrixXd E(static_cast<int>(log.cycles.size()), 6);
  for (std::size_t i = 0; i < log.cycles.size(); ++i) {
    E.row(static_cast<int>(i)).head<3>() = log.cycles[i].e_p.transpose();
    E.row(static_cast<int>(i)).tail<3>() = log.cycles[i].e_o.transpose();
  }
  return E;
}

ErrorSummary summarize(std::span<const double> series) {
  if (series.empty()) {
    throw std::invalid_argument("summarize: empty series");
  }
  std::vector<double> y(series.begin(), series.end());
  std::sort(y.begin(), y.end());
  const auto quantile = [&](double p) {
    const double h = p * (static_cast<double>(y.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, y.size() - 1);
    return y[lo] + (h - std::floor(h)) * (y[hi] - y[lo]);
  };
  ErrorSummary s;
  s.median = quantile(0.5);
  s.q1 = quantile(0.25);
  s.q3 = quantile(0.75);
  s.iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * s.iqr;
  const double hi_fence = s.q3 + 1.5 * s.iqr;
  s.whisker_lo = y.back();
  s.whisker_hi = y.front();
  for (double v : y) {
    if (v >= lo_fence) {
      s.whisker_lo = std::min(s.whisker_lo, v);
    }
    if (v <= hi_fence) {
      s.whisker_hi = std::max(s.whisker_hi, v);
    }
    if (v < lo_fence || v > hi_fence) ++s.outliers;
  }
  s.max = y.back();
  return s;
}

Scenario make_spiral_scenario(const std::string& morphology,
                              ControllerKind kind) {
  Scenario sc;
  sc.name = "spiral_" + morphology;
  sc.chain = find_morphology(morphology);
  sc.q0 = stock_start_posture(morphology);
  sc.qd0 = Eigen::VectorXd::Zero(sc.chain.dof());
  sc.controller = kind;
  sc.weights = ControllerWeights::defaults(sc.chain.dof());
  sc.horizons = HorizonConfig{};

  const auto [p0, R0] = forward_kinematics(sc.chain, sc.q0);
  constexpr double kRadius = 0.15;
  constexpr double kPitch = 0.05;   // rise per turn
  constexpr int kTurns = 2;
  constexpr int kWaypoints = 16;
  Eigen::Vector3d radial(p0.x(), p0.y(), 0.0);
  if (radial.norm() < 1e-6) radial = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d u = radial.normalized();
  const Eigen::Vector3d v = Eigen::Vector3d::UnitZ().cross(u);
  const Eigen::Vector3d center = p0 - kRadius * u;
  for (int j = 0; j < kWaypoints; ++j) {
    const double theta = 2.0 * M_PI * kTurns * j / (kWaypoints - 1);
    Waypoint wp;
    wp.p = center + kRadius * (std::cos(theta) * u + std::sin(theta) * v) +
           Eigen::Vector3d(0, 0, kPitch * theta / (2.0 * M_PI));
    sc.waypoints.push_back(wp);
  }
  sc.R_goal =
      Eigen::AngleAxisd(M_PI / 2.0, Eigen::Vector3d::UnitZ()).toRotationMatrix() *
      R0;
  return sc;
}

Scenario make_extension_scenario(const std::string& morphology,
                                 ControllerKind kind) {
  Scenario sc;
  sc.name = "extend_" + morphology;
  sc.chain = find_morphology(morphology);
  sc.q0 = Eigen::VectorXd::Zero(sc.chain.dof());  // fully extended column
  sc.qd0 = Eigen::VectorXd::Zero(sc.chain.dof());
  sc.controller = kind;
  sc.weights = ControllerWeights::defaults(sc.chain.dof());
  sc.horizons = HorizonConfig{};
  sc.v_max = 0.1;

  const auto [p0, R0] = forward_kinematics(sc.chain, sc.q0);
  Waypoint a, b;
  a.p = p0;
  b.p = p0 + Eigen::Vector3d(0, 0, 0.1);  // outward, past the reach boundary
  sc.waypoints = {a, b};
  sc.R_goal = R0;
  return sc;
}

std::optional<Scenario> stock_scenario(const std::string& name,
                                       ControllerKind kind) {
  const auto sep = name.find('_');
  if (sep == std::string::npos) return std::nullopt;
  const std::string task = name.substr(0, sep);
  const std::string morph = name.substr(sep + 1);
  bool known = false;
  for (const auto& nc : builtin_morphologies()) known = known || nc.name == morph;
  if (!known) return std::nullopt;
  if (task == "spiral") return make_spiral_scenario(morph, kind);
  if (task == "extend") return make_extension_scenario(morph, kind);
  return std::nullopt;
}

std::vector<std::string> stock_scenario_names() {
  std::vector<std::string> names;
  for (const auto& nc : builtin_morphologies()) {
    names.push_back("spiral_" + nc.name);
    names.push_back("extend_" + nc.name);
  }
  return names;
}

}  // namespace hmpc
