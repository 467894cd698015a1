#include "rtd/traj_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rtd {

void TrajTiming::validate() const {
  if (!(t_plan > 0.0 && t_plan <= t_pk && t_pk < t_fin))
    throw std::invalid_argument("timing must satisfy 0 < t_plan <= t_pk < t_fin (got t_plan=" +
                                std::to_string(t_plan) + ", t_pk=" + std::to_string(t_pk) +
                                ", t_fin=" + std::to_string(t_fin) + ")");
}

void ParamBounds::validate() const {
  if (!(v > 0.0 && a > 0.0 && pk > 0.0))
    throw std::invalid_argument("parameter bounds must be positive");
}

bool TrajParam1D::within(const ParamBounds& b) const {
  return std::abs(kappa_v) <= b.v && std::abs(kappa_a) <= b.a && std::abs(kappa_pk) <= b.pk;
}

TrajParam TrajParam::from_vectors(const Vec3& k_v, const Vec3& k_a, const Vec3& k_pk) {
  TrajParam k;
  for (int i = 0; i < 3; ++i) k.axes[i] = {k_v[i], k_a[i], k_pk[i]};
  return k;
}

TrajParam TrajParam::from_array(const std::array<double, 9>& a) {
  TrajParam k;
  for (int i = 0; i < 3; ++i) k.axes[i] = {a[3 * i], a[3 * i + 1], a[3 * i + 2]};
  return k;
}

Vec3 TrajParam::k_v() const { return {axes[0].kappa_v, axes[1].kappa_v, axes[2].kappa_v}; }
Vec3 TrajParam::k_a() const { return {axes[0].kappa_a, axes[1].kappa_a, axes[2].kappa_a}; }
Vec3 TrajParam::k_pk() const { return {axes[0].kappa_pk, axes[1].kappa_pk, axes[2].kappa_pk}; }

std::array<double, 9> TrajParam::to_array() const {
  std::array<double, 9> a{};
  for (int i = 0; i < 3; ++i) {
    a[3 * i] = axes[i].kappa_v;
    a[3 * i + 1] = axes[i].kappa_a;
    a[3 * i + 2] = axes[i].kappa_pk;
  }
  return a;
}

bool TrajParam::within(const ParamBounds& b) const {
  return axes[0].within(b) && axes[1].within(b) && axes[2].within(b);
}

TrajParam TrajParam::operator-() const {
  TrajParam k;
  for (int i = 0; i < 3; ++i) k.axes[i] = -axes[i];
  return k;
}

SegmentCoeffs segment_coeffs(const TrajParam1D& kappa, Segment segment, const TrajTiming& timing) {
  double c3, dv, da;
  if (segment == Segment::kFirst) {
    c3 = timing.t_pk;
    dv = kappa.kappa_pk - kappa.kappa_v - kappa.kappa_a * timing.t_pk;
    da = -kappa.kappa_a;
  } else {
    c3 = timing.t_fin - timing.t_pk;
    dv = -kappa.kappa_pk;
    da = 0.0;
  }
  const double inv = 1.0 / (c3 * c3 * c3);
  return {inv * (-12.0 * dv + 6.0 * c3 * da), inv * (6.0 * c3 * dv - 2.0 * c3 * c3 * da)};
}

namespace {

struct Sample {
  double p, v, a;
};

// Closed-form evaluation of one segment in segment-local time tau.
Sample eval_segment(const SegmentCoeffs& c, double p0, double v0, double a0, double tau) {
  const double t2 = tau * tau, t3 = t2 * tau, t4 = t3 * tau;
  return {p0 + c.c1 / 24.0 * t4 + c.c2 / 6.0 * t3 + 0.5 * a0 * t2 + v0 * tau,
          c.c1 / 6.0 * t3 + 0.5 * c.c2 * t2 + a0 * tau + v0, 0.5 * c.c1 * t2 + c.c2 * tau + a0};
}

Sample eval_1d(double t, const TrajParam1D& k, const TrajTiming& timing) {
  constexpr double kTimeTol = 1e-9;
  if (!(t >= -kTimeTol && t <= timing.t_fin + kTimeTol))
    throw std::out_of_range("trajectory time " + std::to_string(t) + " outside [0, t_fin]");
  t = std::clamp(t, 0.0, timing.t_fin);
  const SegmentCoeffs first = segment_coeffs(k, Segment::kFirst, timing);
  if (t < timing.t_pk) return eval_segment(first, 0.0, k.kappa_v, k.kappa_a, t);
  const Sample at_pk = eval_segment(first, 0.0, k.kappa_v, k.kappa_a, timing.t_pk);
  const SegmentCoeffs second = segment_coeffs(k, Segment::kSecond, timing);
  return eval_segment(second, at_pk.p, k.kappa_pk, 0.0, t - timing.t_pk);
}

}  // namespace

double pos_1d(double t, const TrajParam1D& kappa, const TrajTiming& timing) {
  return eval_1d(t, kappa, timing).p;
}

double vel_1d(double t, const TrajParam1D& kappa, const TrajTiming& timing) {
  return eval_1d(t, kappa, timing).v;
}

double acc_1d(double t, const TrajParam1D& kappa, const TrajTiming& timing) {
  return eval_1d(t, kappa, timing).a;
}

RefPoint ref_point(double t, const TrajParam& k, const TrajTiming& timing) {
  RefPoint r;
  for (int i = 0; i < 3; ++i) {
    const Sample s = eval_1d(t, k.axes[i], timing);
    r.pos[i] = s.p;
    r.vel[i] = s.v;
    r.acc[i] = s.a;
  }
  return r;
}

RefPoint ref_point_clamped(double t, const TrajParam& k, const TrajTiming& timing) {
  return ref_point(std::clamp(t, 0.0, timing.t_fin), k, timing);
}

namespace {

// Each quantity is linear in kappa, so evaluating on the unit basis recovers
// its coefficients exactly.
template <typename F>
AffineCoeffs basis_coeffs(double t, const TrajTiming& timing, F pick) {
  return {pick(eval_1d(t, {1.0, 0.0, 0.0}, timing)), pick(eval_1d(t, {0.0, 1.0, 0.0}, timing)),
          pick(eval_1d(t, {0.0, 0.0, 1.0}, timing))};
}

}  // namespace

AffineCoeffs affine_pos_coeffs(double t, const TrajTiming& timing) {
  return basis_coeffs(t, timing, [](const Sample& s) { return s.p; });
}

AffineCoeffs affine_vel_coeffs(double t, const TrajTiming& timing) {
  return basis_coeffs(t, timing, [](const Sample& s) { return s.v; });
}

AffineCoeffs affine_acc_coeffs(double t, const TrajTiming& timing) {
  return basis_coeffs(t, timing, [](const Sample& s) { return s.a; });
}

bool is_feasible(const Vec3& k_v, const Vec3& k_pk, const TrajTiming& timing, double v_max,
                 double a_max) {
  return k_pk.norm() <= v_max && (k_pk - k_v).norm() / timing.t_pk <= a_max;
}

bool is_feasible(const TrajParam& k, const TrajTiming& timing, double v_max, double a_max) {
  return is_feasible(k.k_v(), k.k_pk(), timing, v_max, a_max);
}

}  // namespace rtd
