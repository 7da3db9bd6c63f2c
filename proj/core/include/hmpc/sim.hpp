#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hmpc/chain.hpp"
#include "hmpc/controllers.hpp"
#include "hmpc/trajectory.hpp"

namespace hmpc {

enum class ControllerKind { hmpc, weighted_mpc, hqp };

const char* to_string(ControllerKind k);
std::optional<ControllerKind> controller_kind_from_string(const std::string& s);

struct Scenario {
  std::string name;
  ChainModel chain;
  Eigen::VectorXd q0, qd0;
  std::vector<Waypoint> waypoints;
  Eigen::Matrix3d R_goal = Eigen::Matrix3d::Identity();
  ControllerKind controller = ControllerKind::hmpc;
  ControllerWeights weights;
  HorizonConfig horizons;
  double v_max = 0.25;  // task-space trajectory limits used by the fitter
  double a_max = 0.5;
  std::uint64_t seed = 0;
};

struct CycleRecord {
  double t = 0.0;
  Eigen::VectorXd q, qd;
  Eigen::VectorXd u;  // applied input
  EndEffectorState x, x_ref;
  Eigen::Vector3d e_p = Eigen::Vector3d::Zero();
  Eigen::Vector3d e_o = Eigen::Vector3d::Zero();
  QPStatus qp_status = QPStatus::optimal;
  int fallback = 0;  // 0 = fresh input, 1 = held previous, 2 = zeroed
  double solve_time = 0.0;  // full controller step, seconds
};

struct ExecutionLog {
  Scenario scenario;
  ReferenceTrajectory reference;
  std::vector<CycleRecord> cycles;
};

/// Kinematic double-integrator plant: the commanded velocity is realized.
std::pair<Eigen::VectorXd, Eigen::VectorXd> integrate_joints(
    const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
    const Eigen::VectorXd& u, double dt);

/// Run T/dt closed-loop cycles. QP failures hold the previous input for
/// at most 10 consecutive cycles, then command zero; the loop never
/// aborts on singular configurations.
ExecutionLog run_closed_loop(const Scenario& sc);

/// Per-cycle componentwise |errors|, columns [ep_x ep_y ep_z eo_x eo_y eo_z].
Eigen::MatrixXd tracking_errors(const ExecutionLog& log);

struct ErrorSummary {
  double median = 0, q1 = 0, q3 = 0, iqr = 0;
  double whisker_lo = 0, whisker_hi = 0;
  int outliers = 0;
  double max = 0;
};

/// Box statistics with type-7 (linear interpolation) quantiles and
/// 1.5*IQR whiskers clipped to the data range.
ErrorSummary summarize(std::span<const double> series);

/// Stock scenarios: "spiral_<M>" is the helical benchmark task on
/// morphology M in A..E, "extend_<M>" drives the fully extended arm
/// toward an unreachable outward target.
std::optional<Scenario> stock_scenario(const std::string& name,
                                       ControllerKind kind);
std::vector<std::string> stock_scenario_names();

Scenario make_spiral_scenario(const std::string& morphology, ControllerKind kind);
Scenario make_extension_scenario(const std::string& morphology,
                                 ControllerKind kind);

}  // namespace hmpc
