#pragma once

#include <functional>
#include <optional>

#include "rtd/quad_sim.hpp"
#include "rtd/traj_model.hpp"

namespace rtd {

/// Diagonal PD gains. Defaults are the Hummingbird tuning.
struct Gains {
  Vec3 x = Vec3::Constant(2.0);
  Vec3 v = Vec3::Constant(0.5);
  Vec3 R = Vec3::Constant(1.0);
  Vec3 omega = Vec3::Constant(0.03);

  void validate() const;
};

struct StateError {
  Vec3 e_x = Vec3::Zero();
  Vec3 e_v = Vec3::Zero();
  Vec3 e_R = Vec3::Zero();
  Vec3 e_omega = Vec3::Zero();
};

struct AttitudeTarget {
  Mat3 R_des = Mat3::Identity();
  Vec3 omega_des = Vec3::Zero();
};

/// Desired trajectory sampled at absolute time t.
using Reference = std::function<RefPoint(double t)>;

/// 0.5 * vee(R_des^T R - R^T R_des).
Vec3 attitude_error(const Mat3& R, const Mat3& R_des);

/// Commanded force vector -G_x e_x - G_v e_v + m g e3 + m a_des.
Vec3 thrust_vector(const RefPoint& ref, const Vec3& e_x, const Vec3& e_v, const Gains& gains,
                   const QuadParams& p);

/// Zero-yaw attitude whose body z axis follows `thrust`; nullopt when
/// ||thrust|| <= 1e-6.
std::optional<Mat3> attitude_from_thrust(const Vec3& thrust);

/// Position/attitude PD tracking controller with a differentially flat attitude
/// target. Holds the last valid R_des to ride through the free-fall singularity,
/// so one instance belongs to one trajectory.
class TrackingController {
 public:
  static constexpr double kFiniteDifferenceStep = 1e-3;

  TrackingController(Gains gains, QuadParams params);

  /// R_des from the thrust vector at t; omega_des by central differences of
  /// R_des over the reference at t +- 1 ms with the feedback terms held fixed.
  AttitudeTarget desired_attitude(double t, const Reference& ref, const Vec3& e_x, const Vec3& e_v);

  Wrench control(double t, const Reference& ref, const QuadState& s);

  const StateError& last_error() const { return last_error_; }
  const Gains& gains() const { return gains_; }
  const QuadParams& params() const { return params_; }

 private:
  Mat3 rotation_or_hold(const Vec3& thrust) const;

  Gains gains_;
  QuadParams params_;
  Mat3 held_R_des_ = Mat3::Identity();
  StateError last_error_;
};

}  // namespace rtd
