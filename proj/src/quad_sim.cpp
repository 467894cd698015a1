#include "rtd/quad_sim.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rtd {

void QuadParams::validate() const {
  if (!(mass > 0 && (inertia.array() > 0).all() && k_tau > 0 && k_mu > 0 && arm > 0 &&
        rotor_min > 0 && rotor_max > 0 && gravity > 0))
    throw std::invalid_argument("quadrotor parameters must be positive");
  if (!(rotor_min < rotor_max)) throw std::invalid_argument("rotor_min must be below rotor_max");
}

Eigen::Matrix4d QuadParams::mixer() const {
  const double kl = k_tau * arm;
  Eigen::Matrix4d m;
  m << k_tau, k_tau, k_tau, k_tau,  //
      0.0, kl, 0.0, -kl,            //
      -kl, 0.0, kl, 0.0,            //
      k_mu, -k_mu, k_mu, -k_mu;
  return m;
}

bool QuadState::is_finite() const {
  return x.allFinite() && v.allFinite() && omega.allFinite() && R.allFinite();
}

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& M) {
  if ((M + M.transpose()).norm() > 1e-9) throw std::invalid_argument("vee: matrix is not skew");
  return {M(2, 1), M(0, 2), M(1, 0)};
}

Vec3 vee_skew_part(const Mat3& M) { return vee(0.5 * (M - M.transpose())); }

Mat3 so3_exp(const Vec3& phi) {
  const double th = phi.norm();
  const Mat3 K = hat(phi);
  double a, b;
  if (th < 1e-6) {
    const double t2 = th * th;
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    a = std::sin(th) / th;
    b = (1.0 - std::cos(th)) / (th * th);
  }
  return Mat3::Identity() + a * K + b * K * K;
}

double orthonormality_error(const Mat3& R) { return (R.transpose() * R - Mat3::Identity()).norm(); }

void reorthonormalize(Mat3& R) {
  if (orthonormality_error(R) <= 1e-9) return;
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 Q = svd.matrixU() * svd.matrixV().transpose();
  if (Q.determinant() < 0) {
    Mat3 U = svd.matrixU();
    U.col(2) *= -1.0;
    Q = U * svd.matrixV().transpose();
  }
  R = Q;
}

Eigen::Vector4d wrench_to_rotors(const Wrench& u, const QuadParams& p) {
  const Eigen::Vector4d w(u.thrust, u.moment.x(), u.moment.y(), u.moment.z());
  Eigen::Vector4d sq = p.mixer().partialPivLu().solve(w);
  const double lo = p.rotor_min * p.rotor_min, hi = p.rotor_max * p.rotor_max;
  return sq.cwiseMax(lo).cwiseMin(hi).cwiseSqrt();
}

Wrench rotors_to_wrench(const Eigen::Vector4d& rpm, const QuadParams& p) {
  const Eigen::Vector4d w = p.mixer() * rpm.cwiseProduct(rpm);
  return {w[0], Vec3(w[1], w[2], w[3])};
}

Wrench saturate(const Wrench& u, const QuadParams& p) {
  return rotors_to_wrench(wrench_to_rotors(u, p), p);
}

StateDerivative dynamics(const QuadState& s, const Wrench& u, const QuadParams& p) {
  const Vec3 e3 = Vec3::UnitZ();
  const Vec3 Jw = p.inertia.cwiseProduct(s.omega);
  return {s.v, (u.thrust / p.mass) * (s.R * e3) - p.gravity * e3,
          (u.moment - s.omega.cross(Jw)).cwiseQuotient(p.inertia), s.R * hat(s.omega)};
}

QuadState step_lie_euler(const QuadState& s, const Wrench& u, const QuadParams& p, double dt) {
  const StateDerivative d = dynamics(s, u, p);
  QuadState n;
  n.x = s.x + dt * d.x_dot;
  n.v = s.v + dt * d.v_dot;
  n.omega = s.omega + dt * d.omega_dot;
  n.R = s.R * so3_exp(dt * s.omega);
  reorthonormalize(n.R);
  return n;
}

namespace {

// Inverse of the derivative of the exponential map for R' = R hat(w), truncated
// at the order needed by a fourth-order method.
Vec3 dexpinv(const Vec3& theta, const Vec3& w) {
  const Vec3 tw = theta.cross(w);
  return w + 0.5 * tw + theta.cross(tw) / 12.0;
}

}  // namespace

QuadState step_rkmk4(const QuadState& s, double t, const ControlFn& u_fn, const QuadParams& p,
                     double dt) {
  struct Stage {
    Vec3 dx, dv, dw, dtheta;
  };
  auto eval = [&](double ts, const Vec3& x, const Vec3& v, const Vec3& w, const Vec3& theta) {
    QuadState st{x, v, w, s.R * so3_exp(theta)};
    const Wrench u = saturate(u_fn(ts, st), p);
    const StateDerivative d = dynamics(st, u, p);
    return Stage{dt * d.x_dot, dt * d.v_dot, dt * d.omega_dot, dt * dexpinv(theta, w)};
  };
  const Vec3 zero = Vec3::Zero();
  const Stage k1 = eval(t, s.x, s.v, s.omega, zero);
  const Stage k2 = eval(t + 0.5 * dt, s.x + 0.5 * k1.dx, s.v + 0.5 * k1.dv,
                        s.omega + 0.5 * k1.dw, 0.5 * k1.dtheta);
  const Stage k3 = eval(t + 0.5 * dt, s.x + 0.5 * k2.dx, s.v + 0.5 * k2.dv,
                        s.omega + 0.5 * k2.dw, 0.5 * k2.dtheta);
  const Stage k4 = eval(t + dt, s.x + k3.dx, s.v + k3.dv, s.omega + k3.dw, k3.dtheta);
  QuadState n;
  n.x = s.x + (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx) / 6.0;
  n.v = s.v + (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv) / 6.0;
  n.omega = s.omega + (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw) / 6.0;
  n.R = s.R * so3_exp((k1.dtheta + 2.0 * k2.dtheta + 2.0 * k3.dtheta + k4.dtheta) / 6.0);
  reorthonormalize(n.R);
  return n;
}

std::vector<TimedState> simulate(const QuadState& s0, const ControlFn& controller, double t0,
                                 double t1, double dt, const QuadParams& p,
                                 Integrator integrator) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
  if (t1 < t0) throw std::invalid_argument("simulate: t1 < t0");
  const auto full_steps = static_cast<long>(std::floor((t1 - t0) / dt + 1e-9));
  std::vector<TimedState> out;
  out.reserve(full_steps + 2);
  out.push_back({t0, s0});
  QuadState s = s0;
  long n = 0;
  double t = t0;
  while (t < t1 - 1e-12) {
    const double t_next = n + 1 <= full_steps ? t0 + (n + 1) * dt : t1;
    const double h = t_next - t;
    if (integrator == Integrator::kLieEuler) {
      s = step_lie_euler(s, saturate(controller(t, s), p), p, h);
    } else {
      s = step_rkmk4(s, t, controller, p, h);
    }
    if (!s.is_finite()) {
      std::ostringstream msg;
      msg << "simulate: non-finite state at t=" << t_next;
      throw std::runtime_error(msg.str());
    }
    ++n;
    t = t_next;
    out.push_back({t, s});
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, std::span<const TimedState> traj) {
  os << "t,x1,x2,x3,v1,v2,v3,w1,w2,w3,r11,r12,r13,r21,r22,r23,r31,r32,r33\n";
  os.precision(10);
  for (const TimedState& ts : traj) {
    const QuadState& s = ts.s;
    os << ts.t;
    for (int i = 0; i < 3; ++i) os << ',' << s.x[i];
    for (int i = 0; i < 3; ++i) os << ',' << s.v[i];
    for (int i = 0; i < 3; ++i) os << ',' << s.omega[i];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) os << ',' << s.R(r, c);
    os << '\n';
  }
}

}  // namespace rtd
