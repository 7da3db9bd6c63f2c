#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <optional>
#include <vector>

#include "hmpc/chain.hpp"

namespace hmpc {

struct Waypoint {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  std::optional<Eigen::Matrix3d> R;  // only first/last need orientation
};

/// Piecewise-cubic position trajectory. Each segment stores its duration
/// and the coefficient columns of p(tau) = a0 + a1*tau + a2*tau^2 + a3*tau^3.
class PositionTrajectory {
 public:
  struct Segment {
    double duration = 0.0;
    Eigen::Matrix<double, 3, 4> coeffs = Eigen::Matrix<double, 3, 4>::Zero();
  };

  explicit PositionTrajectory(std::vector<Segment> segments);

  double total_duration() const { return total_duration_; }
  const std::vector<Segment>& segments() const { return segments_; }

  /// Position and first two derivatives at t. t outside [0, T] by more
  /// than 1e-9 throws; within the slack it clamps to the endpoint.
  void sample(double t, Eigen::Vector3d& p, Eigen::Vector3d& pd,
              Eigen::Vector3d& pdd) const;

 private:
  std::vector<Segment> segments_;
  std::vector<double> knot_times_;  // cumulative, size = segments + 1
  double total_duration_ = 0.0;
};

/// Constant-rate geodesic between two orientations:
/// R(t) = R_in * exp((t/T) * log(R_in^T R_d)).
class OrientationTrajectory {
 public:
  OrientationTrajectory(const Eigen::Matrix3d& R_in, const Eigen::Matrix3d& R_d,
                        double T);

  double duration() const { return T_; }
  const Eigen::Vector3d& body_rate() const { return Omega_; }

  Eigen::Matrix3d rotation_at(double t) const;
  /// World-frame angular velocity (constant along a geodesic).
  Eigen::Vector3d angular_velocity_at(double t) const;

 private:
  Eigen::Matrix3d R_in_;
  Eigen::Matrix3d R_d_;
  double T_;
  Eigen::Vector3d Omega_;  // constant body-frame rate
};

/// Discrete reference: ceil(T/dt)+1 synchronized samples, final sample
/// exactly at T. Quaternions are unit and sign-canonicalized.
struct ReferenceTrajectory {
  double dt = 0.0;
  std::vector<EndEffectorState> samples;

  /// Sample at index k, holding the last sample past the end.
  const EndEffectorState& at(std::size_t k) const {
    return k < samples.size() ? samples[k] : samples.back();
  }
};

/// Fit a C1 piecewise cubic through the waypoints: zero end velocities,
/// Catmull-Rom interior velocities, durations from the conservative
/// 1.5*|dp|/T <= v_max and 6*|dp|/T^2 <= a_max bounds, then one exact
/// time-scaling pass so the sampled speed/acceleration limits hold.
PositionTrajectory fit_position_trajectory(const std::vector<Waypoint>& waypoints,
                                           double v_max, double a_max);

OrientationTrajectory make_orientation_trajectory(const Eigen::Matrix3d& R_in,
                                                  const Eigen::Matrix3d& R_d,
                                                  double T);

ReferenceTrajectory build_reference(const PositionTrajectory& ptraj,
                                    const OrientationTrajectory& otraj,
                                    double dt);

}  // namespace hmpc
