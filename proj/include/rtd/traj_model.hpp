#pragma once

#include <array>

#include "rtd/geometry.hpp"

namespace rtd {

/// Planning timing. Each plan lasts t_fin; the peak speed is reached at t_pk
/// and a new plan must be found within t_plan.
struct TrajTiming {
  double t_plan = 0.75;
  double t_pk = 1.0;
  double t_fin = 3.0;

  /// Throws std::invalid_argument unless 0 < t_plan <= t_pk < t_fin.
  void validate() const;
  bool operator==(const TrajTiming&) const = default;
};

/// Symmetric per-axis parameter bounds |kappa_v| <= v, |kappa_a| <= a, |kappa_pk| <= pk.
struct ParamBounds {
  double v = 5.0;
  double a = 10.0;
  double pk = 5.0;

  void validate() const;
  bool operator==(const ParamBounds&) const = default;
};

/// One axis of a trajectory parameter: initial speed, initial acceleration, peak speed.
struct TrajParam1D {
  double kappa_v = 0.0;
  double kappa_a = 0.0;
  double kappa_pk = 0.0;

  bool within(const ParamBounds& b) const;
  TrajParam1D operator-() const { return {-kappa_v, -kappa_a, -kappa_pk}; }
};

/// Three decoupled axes of TrajParam1D.
struct TrajParam {
  std::array<TrajParam1D, 3> axes{};

  static TrajParam from_vectors(const Vec3& k_v, const Vec3& k_a, const Vec3& k_pk);
  /// Inverse of to_array: (kappa_v, kappa_a, kappa_pk) per axis.
  static TrajParam from_array(const std::array<double, 9>& a);

  Vec3 k_v() const;
  Vec3 k_a() const;
  Vec3 k_pk() const;
  std::array<double, 9> to_array() const;
  bool within(const ParamBounds& b) const;
  TrajParam operator-() const;
};

struct RefPoint {
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  Vec3 acc = Vec3::Zero();
};

enum class Segment { kFirst, kSecond };

struct SegmentCoeffs {
  double c1 = 0.0;
  double c2 = 0.0;
};

SegmentCoeffs segment_coeffs(const TrajParam1D& kappa, Segment segment, const TrajTiming& timing);

/// Desired position, velocity and acceleration along one axis. Throws
/// std::out_of_range when t is outside [0, t_fin].
double pos_1d(double t, const TrajParam1D& kappa, const TrajTiming& timing);
double vel_1d(double t, const TrajParam1D& kappa, const TrajTiming& timing);
double acc_1d(double t, const TrajParam1D& kappa, const TrajTiming& timing);

RefPoint ref_point(double t, const TrajParam& k, const TrajTiming& timing);
/// ref_point with t clamped to [0, t_fin]; after t_fin the reference rests at its end point.
RefPoint ref_point_clamped(double t, const TrajParam& k, const TrajTiming& timing);

/// Coefficients of a quantity that is linear in (kappa_v, kappa_a, kappa_pk).
struct AffineCoeffs {
  double v = 0.0;
  double a = 0.0;
  double pk = 0.0;

  double dot(const TrajParam1D& k) const { return v * k.kappa_v + a * k.kappa_a + pk * k.kappa_pk; }
};

/// pos_1d(t; kappa) == coeffs.dot(kappa).
AffineCoeffs affine_pos_coeffs(double t, const TrajTiming& timing);
/// vel_1d(t; kappa) == coeffs.dot(kappa); the time derivative of affine_pos_coeffs.
AffineCoeffs affine_vel_coeffs(double t, const TrajTiming& timing);
/// acc_1d(t; kappa) == coeffs.dot(kappa).
AffineCoeffs affine_acc_coeffs(double t, const TrajTiming& timing);

/// ||k_pk||_2 <= v_max and ||k_pk - k_v||_2 / t_pk <= a_max.
bool is_feasible(const TrajParam& k, const TrajTiming& timing, double v_max, double a_max);
bool is_feasible(const Vec3& k_v, const Vec3& k_pk, const TrajTiming& timing, double v_max,
                 double a_max);

}  // namespace rtd
