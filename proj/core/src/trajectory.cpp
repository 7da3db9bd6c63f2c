#include "hmpc/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hmpc {

namespace {

// Real roots of c0 + c1*x + c2*x^2 + c3*x^3 restricted to [lo, hi].
void real_roots_in(double c0, double c1, double c2, double c3, double lo,
                   double hi, std::vector<double>& out) {
  const double scale =
      std::max({std::abs(c0), std::abs(c1), std::abs(c2), std::abs(c3)});
  if (scale == 0.0) return;
  auto push = [&](double x) {
    if (x >= lo && x <= hi) out.push_back(x);
  };
  if (std::abs(c3) > 1e-14 * scale) {
    // Companion-matrix eigenvalues; robust for the well-scaled cubics here.
    Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
    C(1, 0) = 1.0;
    C(2, 1) = 1.0;
    C(0, 2) = -c0 / c3;
    C(1, 2) = -c1 / c3;
    C(2, 2) = -c2 / c3;
    const Eigen::EigenSolver<Eigen::Matrix3d> es(C);
    for (int i = 0; i < 3; ++i) {
      const auto ev = es.eigenvalues()(i);
      if (std::abs(ev.imag()) < 1e-9 * (1.0 + std::abs(ev.real()))) {
        push(ev.real());
      }
    }
  } else if (std::abs(c2) > 1e-14 * scale) {
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      push((-c1 + sq) / (2.0 * c2));
      push((-c1 - sq) / (2.0 * c2));
    }
  } else if (std::abs(c1) > 1e-14 * scale) {
    push(-c0 / c1);
  }
}

// Exact peak speed of a cubic segment: |pd|^2 is a quartic in tau, so its
// critical points are the real roots of a cubic.
double segment_peak_speed(const PositionTrajectory::Segment& s) {
  const Eigen::Vector3d a1 = s.coeffs.col(1);
  const Eigen::Vector3d a2 = s.coeffs.col(2);
  const Eigen::Vector3d a3 = s.coeffs.col(3);
  // pd(tau) = a1 + 2*a2*tau + 3*a3*tau^2 =: u + v*tau + w*tau^2
  const Eigen::Vector3d u = a1, v = 2.0 * a2, w = 3.0 * a3;
  // d/dtau |pd|^2 = 2*(u.v) + 2*(v.v + 2*u.w)*tau + 6*(v.w)*tau^2 + 4*(w.w)*tau^3
  std::vector<double> crit{0.0, s.duration};
  real_roots_in(2.0 * u.dot(v), 2.0 * (v.dot(v) + 2.0 * u.dot(w)),
                6.0 * v.dot(w), 4.0 * w.dot(w), 0.0, s.duration, crit);
  double best = 0.0;
  for (double tau : crit) {
    best = std::max(best, (u + v * tau + w * tau * tau).norm());
  }
  return best;
}

// |pdd| is convex in tau, so the peak is at a segment endpoint.
double segment_peak_accel(const PositionTrajectory::Segment& s) {
  const Eigen::Vector3d at0 = 2.0 * s.coeffs.col(2);
  const Eigen::Vector3d atT =
      2.0 * s.coeffs.col(2) + 6.0 * s.coeffs.col(3) * s.duration;
  return std::max(at0.norm(), atT.norm());
}

PositionTrajectory::Segment hermite_segment(const Eigen::Vector3d& p0,
                                            const Eigen::Vector3d& p1,
                                            const Eigen::Vector3d& v0,
                                            const Eigen::Vector3d& v1,
                                            double T) {
  PositionTrajectory::Segment s;
  s.duration = T;
  const Eigen::Vector3d dp = p1 - p0;
  s.coeffs.col(0) = p0;
  s.coeffs.col(1) = v0;
  s.coeffs.col(2) = 3.0 * dp / (T * T) - (2.0 * v0 + v1) / T;
  s.coeffs.col(3) = -2.0 * dp / (T * T * T) + (v0 + v1) / (T * T);
  return s;
}

}  // namespace

PositionTrajectory::PositionTrajectory(std::vector<Segment> segments)
    : segments_(std::move(segments)) {
  if (segments_.empty()) {
    throw std::invalid_argument("PositionTrajectory: no segments");
  }
  knot_times_.push_back(0.0);
  for (const auto& s : segments_) {
    if (!(s.duration > 0.0)) {
      throw std::invalid_argument("PositionTrajectory: non-positive duration");
    }
    knot_times_.push_back(knot_times_.back() + s.duration);
  }
  total_duration_ = knot_times_.back();
}

void PositionTrajectory::sample(double t, Eigen::Vector3d& p,
                                Eigen::Vector3d& pd,
                                Eigen::Vector3d& pdd) const {
  if (t < -1e-9 || t > total_duration_ + 1e-9) {
    throw std::out_of_range("PositionTrajectory::sample: t outside [0, T]");
  }
  t = std::clamp(t, 0.0, total_duration_);
  // Last knot <= t; final instant belongs to the last segment.
  auto it = std::upper_bound(knot_times_.begin(), knot_times_.end(), t);
  std::size_t idx = static_cast<std::size_t>(it - knot_times_.begin());
  idx = std::min(idx == 0 ? 0 : idx - 1, segments_.size() - 1);
  const Segment& s = segments_[idx];
  const double tau = t - knot_times_[idx];
  const auto& a = s.coeffs;
  p = a.col(0) + tau * (a.col(1) + tau * (a.col(2) + tau * a.col(3)));
  pd = a.col(1) + tau * (2.0 * a.col(2) + 3.0 * tau * a.col(3));
  pdd = 2.0 * a.col(2) + 6.0 * tau * a.col(3);
}

PositionTrajectory fit_position_trajectory(const std::vector<Waypoint>& waypoints,
                                           double v_max, double a_max) {
  if (waypoints.size() < 2) {
    throw std::invalid_argument("fit_position_trajectory: need >= 2 waypoints");
  }
  if (!(v_max > 0.0) || !(a_max > 0.0)) {
    throw std::invalid_argument("fit_position_trajectory: limits must be positive");
  }
  const std::size_t n_seg = waypoints.size() - 1;
  std::vector<double> durations(n_seg);
  for (std::size_t i = 0; i < n_seg; ++i) {
    const double d = (waypoints[i + 1].p - waypoints[i].p).norm();
    if (d < 1e-12) {
      throw std::invalid_argument(
          "fit_position_trajectory: duplicate consecutive waypoints");
    }
    durations[i] = std::max(1.5 * d / v_max, std::sqrt(6.0 * d / a_max));
  }

  // Zero end velocities; Catmull-Rom style interior velocities.
  std::vector<Eigen::Vector3d> vel(waypoints.size(), Eigen::Vector3d::Zero());
  for (std::size_t i = 1; i + 1 < waypoints.size(); ++i) {
    vel[i] = (waypoints[i + 1].p - waypoints[i - 1].p) /
             (durations[i - 1] + durations[i]);
  }

  auto build = [&]() {
    std::vector<PositionTrajectory::Segment> segs;
    segs.reserve(n_seg);
    for (std::size_t i = 0; i < n_seg; ++i) {
      segs.push_back(hermite_segment(waypoints[i].p, waypoints[i + 1].p, vel[i],
                                     vel[i + 1], durations[i]));
    }
    return segs;
  };

  std::vector<PositionTrajectory::Segment> segs = build();
  double peak_v = 0.0, peak_a = 0.0;
  for (const auto& s : segs) {
    peak_v = std::max(peak_v, segment_peak_speed(s));
    peak_a = std::max(peak_a, segment_peak_accel(s));
  }
  // Uniform time scaling is exact: speeds scale by 1/alpha, accelerations
  // by 1/alpha^2, so one pass lands inside the limits.
  const double alpha =
      std::max({1.0, peak_v / v_max, std::sqrt(peak_a / a_max)}) *
      (1.0 + 1e-12);
  if (alpha > 1.0 + 1e-12) {
    for (auto& d : durations) d *= alpha;
    for (auto& v : vel) v /= alpha;
    segs = build();
  }
  return PositionTrajectory(std::move(segs));
}

OrientationTrajectory::OrientationTrajectory(const Eigen::Matrix3d& R_in,
                                             const Eigen::Matrix3d& R_d,
                                             double T)
    : R_in_(R_in), R_d_(R_d), T_(T) {
  if (!(T > 0.0)) {
    throw std::invalid_argument("OrientationTrajectory: T must be positive");
  }
  const Eigen::Matrix3d R_rel = R_in.transpose() * R_d;
  const double angle = rotation_angle(R_rel);
  if (angle > M_PI - 1e-9) {
    throw std::invalid_argument(
        "OrientationTrajectory: relative rotation at the pi branch point; "
        "insert an intermediate waypoint orientation");
  }
  Omega_ = log_so3(R_rel) / T;
}

Eigen::Matrix3d OrientationTrajectory::rotation_at(double t) const {
  return R_in_ * exp_so3(t * Omega_);
}

Eigen::Vector3d OrientationTrajectory::angular_velocity_at(double t) const {
  return rotation_at(t) * Omega_;
}

OrientationTrajectory make_orientation_trajectory(const Eigen::Matrix3d& R_in,
                                                  const Eigen::Matrix3d& R_d,
                                                  double T) {
  return OrientationTrajectory(R_in, R_d, T);
}

ReferenceTrajectory build_reference(const PositionTrajectory& ptraj,
                                    const OrientationTrajectory& otraj,
                                    double dt) {
  const double T = ptraj.total_duration();
  if (std::abs(otraj.duration() - T) > 1e-9) {
    throw std::invalid_argument(
        "build_reference: orientation duration does not match position duration");
  }
  if (!(dt > 0.0)) {
    throw std::invalid_argument("build_reference: dt must be positive");
  }
  if (dt > T + 1e-12) {
    throw std::invalid_argument("build_reference: dt exceeds total duration");
  }
  const int n = static_cast<int>(std::ceil(T / dt - 1e-9));
  ReferenceTrajectory ref;
  ref.dt = dt;
  ref.samples.reserve(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = (k == n) ? T : std::min(k * dt, T);
    EndEffectorState x;
    Eigen::Vector3d pdd;
    ptraj.sample(t, x.p, x.pd, pdd);
    x.o = quat_from_rotation(otraj.rotation_at(t));
    x.w = otraj.angular_velocity_at(t);
    ref.samples.push_back(x);
  }
  return ref;
}

}  // namespace hmpc
