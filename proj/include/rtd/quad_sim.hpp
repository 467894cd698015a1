#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "rtd/geometry.hpp"

namespace rtd {

/// Rigid-body and rotor parameters (AscTec Hummingbird class vehicle).
struct QuadParams {
  double mass = 0.547;                          // kg
  Vec3 inertia = Vec3(0.0033, 0.0033, 0.0058);  // kg m^2, principal moments
  double k_tau = 1.5e-7;                        // N / rpm^2
  double k_mu = 3.75e-9;                        // N m / rpm^2
  double arm = 0.27;                            // m
  double rotor_min = 1100.0;                    // rpm
  double rotor_max = 8600.0;                    // rpm
  double gravity = 9.81;                        // m / s^2

  void validate() const;
  /// Maps squared rotor speeds to (thrust, moment_x, moment_y, moment_z).
  Eigen::Matrix4d mixer() const;
  double max_thrust() const { return 4.0 * k_tau * rotor_max * rotor_max; }
  double hover_thrust() const { return mass * gravity; }
};

/// Position, velocity, body angular velocity and attitude.
struct QuadState {
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  Mat3 R = Mat3::Identity();

  static QuadState at_rest(const Vec3& x) { return {x, Vec3::Zero(), Vec3::Zero(), Mat3::Identity()}; }
  bool is_finite() const;
};

/// Net thrust along body z and body moment.
struct Wrench {
  double thrust = 0.0;
  Vec3 moment = Vec3::Zero();
};

struct StateDerivative {
  Vec3 x_dot;
  Vec3 v_dot;
  Vec3 omega_dot;
  Mat3 R_dot;
};

Mat3 hat(const Vec3& v);
/// Inverse of hat; throws std::invalid_argument unless ||M + M^T|| <= 1e-9.
Vec3 vee(const Mat3& M);
/// vee of the skew-symmetric part, for matrices that are skew only up to round-off.
Vec3 vee_skew_part(const Mat3& M);

/// Rodrigues formula for exp(hat(phi)).
Mat3 so3_exp(const Vec3& phi);

/// Projects R back onto SO(3) (polar decomposition) when ||R^T R - I|| exceeds 1e-9.
void reorthonormalize(Mat3& R);
double orthonormality_error(const Mat3& R);

Eigen::Vector4d wrench_to_rotors(const Wrench& u, const QuadParams& p);
Wrench rotors_to_wrench(const Eigen::Vector4d& rpm, const QuadParams& p);
/// Round trip through the rotor model with speed saturation.
Wrench saturate(const Wrench& u, const QuadParams& p);

/// Rigid-body dynamics for an already-saturated input.
StateDerivative dynamics(const QuadState& s, const Wrench& u, const QuadParams& p);

/// Explicit Euler on (x, v, omega) and R <- R exp(dt hat(omega)).
QuadState step_lie_euler(const QuadState& s, const Wrench& u, const QuadParams& p, double dt);

/// Control law evaluated at (t, state); outputs are saturated by the integrators.
using ControlFn = std::function<Wrench(double t, const QuadState& s)>;

/// Classical RK4 on (x, v, omega) with a Runge-Kutta/Munthe-Kaas update for R.
QuadState step_rkmk4(const QuadState& s, double t, const ControlFn& u_fn, const QuadParams& p,
                     double dt);

enum class Integrator { kLieEuler, kRkmk4 };

struct TimedState {
  double t = 0.0;
  QuadState s;
};

/// Closed-loop simulation from t0 to t1 with fixed step dt (the last step is
/// shortened to land on t1). Throws std::runtime_error on a non-finite state.
std::vector<TimedState> simulate(const QuadState& s0, const ControlFn& controller, double t0,
                                 double t1, double dt, const QuadParams& p,
                                 Integrator integrator = Integrator::kLieEuler);

/// CSV with header t,x1,x2,x3,v1,v2,v3,w1,w2,w3,r11..r33 (row-major R).
void write_trajectory_csv(std::ostream& os, std::span<const TimedState> traj);

}  // namespace rtd
