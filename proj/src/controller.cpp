#include "rtd/controller.hpp"

#include <stdexcept>

namespace rtd {

void Gains::validate() const {
  if (!((x.array() > 0).all() && (v.array() > 0).all() && (R.array() > 0).all() &&
        (omega.array() > 0).all()))
    throw std::invalid_argument("controller gains must be positive");
}

Vec3 attitude_error(const Mat3& R, const Mat3& R_des) {
  return 0.5 * vee_skew_part(R_des.transpose() * R - R.transpose() * R_des);
}

Vec3 thrust_vector(const RefPoint& ref, const Vec3& e_x, const Vec3& e_v, const Gains& gains,
                   const QuadParams& p) {
  return -gains.x.cwiseProduct(e_x) - gains.v.cwiseProduct(e_v) +
         p.mass * p.gravity * Vec3::UnitZ() + p.mass * ref.acc;
}

std::optional<Mat3> attitude_from_thrust(const Vec3& thrust) {
  const double n = thrust.norm();
  if (!(n > 1e-6)) return std::nullopt;
  const Vec3 b3 = thrust / n;
  Vec3 b2 = b3.cross(Vec3::UnitX());
  const double n2 = b2.norm();
  // Thrust along e1 leaves the heading undefined; fall back to e2 as the yaw reference.
  if (n2 < 1e-9) {
    const Vec3 b1 = Vec3::UnitY().cross(b3).normalized();
    b2 = b3.cross(b1);
  } else {
    b2 /= n2;
  }
  const Vec3 b1 = b2.cross(b3);
  Mat3 R;
  R.col(0) = b1;
  R.col(1) = b2;
  R.col(2) = b3;
  return R;
}

TrackingController::TrackingController(Gains gains, QuadParams params)
    : gains_(std::move(gains)), params_(std::move(params)) {}

Mat3 TrackingController::rotation_or_hold(const Vec3& thrust) const {
  return attitude_from_thrust(thrust).value_or(held_R_des_);
}

AttitudeTarget TrackingController::desired_attitude(double t, const Reference& ref,
                                                    const Vec3& e_x, const Vec3& e_v) {
  const double h = kFiniteDifferenceStep;
  const RefPoint r0 = ref(t);
  AttitudeTarget out;
  out.R_des = rotation_or_hold(thrust_vector(r0, e_x, e_v, gains_, params_));
  held_R_des_ = out.R_des;

  // One-sided difference at the start of a reference.
  const double t_lo = t - h >= 0.0 ? t - h : t;
  const double t_hi = t + h;
  const Mat3 R_lo = rotation_or_hold(thrust_vector(ref(t_lo), e_x, e_v, gains_, params_));
  const Mat3 R_hi = rotation_or_hold(thrust_vector(ref(t_hi), e_x, e_v, gains_, params_));
  const Mat3 R_dot = (R_hi - R_lo) / (t_hi - t_lo);
  out.omega_des = vee_skew_part(out.R_des.transpose() * R_dot);
  return out;
}

Wrench TrackingController::control(double t, const Reference& ref, const QuadState& s) {
  const RefPoint r = ref(t);
  StateError e;
  e.e_x = s.x - r.pos;
  e.e_v = s.v - r.vel;
  const AttitudeTarget target = desired_attitude(t, ref, e.e_x, e.e_v);
  e.e_R = attitude_error(s.R, target.R_des);
  e.e_omega = s.omega - target.omega_des;
  last_error_ = e;

  Wrench u;
  u.thrust = thrust_vector(r, e.e_x, e.e_v, gains_, params_).norm();
  u.moment = -gains_.omega.cwiseProduct(e.e_omega) - gains_.R.cwiseProduct(e.e_R);
  return u;
}

}  // namespace rtd
