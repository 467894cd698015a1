#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rtd/traj_model.hpp"

using namespace rtd;

namespace {

const TrajTiming kTiming;

TrajParam1D random_kappa(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> v(-5, 5), a(-10, 10);
  return {v(rng), a(rng), v(rng)};
}

// Composite Gauss-Legendre (5 nodes) of vel_1d over [0, t], split at t_pk so
// each panel integrates a polynomial exactly.
double integrate_vel(double t, const TrajParam1D& k) {
  static const double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                              0.9061798459386640};
  static const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                              0.2369268850561891};
  auto panel = [&](double a, double b) {
    double s = 0.0;
    for (int i = 0; i < 5; ++i) s += w[i] * vel_1d(0.5 * (a + b) + 0.5 * (b - a) * x[i], k, kTiming);
    return 0.5 * (b - a) * s;
  };
  if (t <= kTiming.t_pk) return panel(0.0, t);
  return panel(0.0, kTiming.t_pk) + panel(kTiming.t_pk, t);
}

}  // namespace

TEST(Timing, Validation) {
  EXPECT_NO_THROW(kTiming.validate());
  EXPECT_THROW((TrajTiming{1.5, 1.0, 3.0}.validate()), std::invalid_argument);
  EXPECT_THROW((TrajTiming{0.75, 3.0, 3.0}.validate()), std::invalid_argument);
  EXPECT_THROW((TrajTiming{0.0, 1.0, 3.0}.validate()), std::invalid_argument);
}

TEST(SegmentCoeffs, HandEvaluatedExamples) {
  const SegmentCoeffs flat = segment_coeffs({2.0, 0.0, 2.0}, Segment::kFirst, kTiming);
  EXPECT_DOUBLE_EQ(flat.c1, 0.0);
  EXPECT_DOUBLE_EQ(flat.c2, 0.0);
  const SegmentCoeffs unit = segment_coeffs({0.0, 0.0, 1.0}, Segment::kFirst, kTiming);
  EXPECT_NEAR(unit.c1, -12.0, 1e-12);
  EXPECT_NEAR(unit.c2, 6.0, 1e-12);
  // second segment depends only on kappa_pk (dv = -kappa_pk, da = 0)
  const SegmentCoeffs s1 = segment_coeffs({3.0, 7.0, 1.0}, Segment::kSecond, kTiming);
  const SegmentCoeffs s2 = segment_coeffs({-4.0, 0.0, 1.0}, Segment::kSecond, kTiming);
  EXPECT_EQ(s1.c1, s2.c1);
  EXPECT_EQ(s1.c2, s2.c2);
}

TEST(TrajModel, BoundaryConditions) {
  std::mt19937_64 rng(1);
  for (int n = 0; n < 200; ++n) {
    const TrajParam1D k = random_kappa(rng);
    EXPECT_EQ(pos_1d(0.0, k, kTiming), 0.0);
    EXPECT_NEAR(vel_1d(0.0, k, kTiming), k.kappa_v, 1e-12);
    EXPECT_NEAR(acc_1d(0.0, k, kTiming), k.kappa_a, 1e-12);
    EXPECT_NEAR(vel_1d(kTiming.t_pk, k, kTiming), k.kappa_pk, 1e-12);
    EXPECT_NEAR(acc_1d(kTiming.t_pk, k, kTiming), 0.0, 1e-12);
    EXPECT_NEAR(vel_1d(kTiming.t_fin, k, kTiming), 0.0, 1e-12);
    EXPECT_NEAR(acc_1d(kTiming.t_fin, k, kTiming), 0.0, 1e-12);
  }
}

TEST(TrajModel, ContinuityAcrossPeak) {
  std::mt19937_64 rng(2);
  const double h = 1e-7;
  for (int n = 0; n < 100; ++n) {
    const TrajParam1D k = random_kappa(rng);
    const double t = kTiming.t_pk;
    EXPECT_NEAR(pos_1d(t - h, k, kTiming), pos_1d(t + h, k, kTiming), 1e-5);
    EXPECT_NEAR(vel_1d(t - h, k, kTiming), vel_1d(t + h, k, kTiming), 1e-5);
    EXPECT_NEAR(acc_1d(t - h, k, kTiming), acc_1d(t + h, k, kTiming), 1e-4);
  }
}

TEST(TrajModel, OutOfRangeTimes) {
  const TrajParam1D k{1, 0, 2};
  EXPECT_THROW(pos_1d(-1e-6, k, kTiming), std::out_of_range);
  EXPECT_THROW(vel_1d(3.0 + 1e-6, k, kTiming), std::out_of_range);
  EXPECT_THROW(ref_point(4.0, TrajParam{}, kTiming), std::out_of_range);
  const TrajParam k3 = TrajParam::from_vectors(Vec3(1, 0, 0), Vec3::Zero(), Vec3(2, 0, 0));
  EXPECT_TRUE(ref_point_clamped(10.0, k3, kTiming).pos.isApprox(ref_point(3.0, k3, kTiming).pos));
  EXPECT_TRUE(ref_point_clamped(10.0, k3, kTiming).vel.isZero(1e-12));
}

TEST(TrajModel, ConstantSpeedDegenerate) {
  const TrajParam1D k{2.0, 0.0, 2.0};
  EXPECT_NEAR(pos_1d(kTiming.t_pk, k, kTiming), 2.0, 1e-12);
  EXPECT_NEAR(vel_1d(0.5, k, kTiming), 2.0, 1e-12);
  for (double t : {0.0, 0.7, 1.9, 3.0}) EXPECT_EQ(pos_1d(t, TrajParam1D{}, kTiming), 0.0);
}

TEST(TrajModel, PositionMatchesQuadratureOfVelocity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ut(0.0, kTiming.t_fin);
  for (int n = 0; n < 1000; ++n) {
    const TrajParam1D k = random_kappa(rng);
    const double t = ut(rng);
    EXPECT_NEAR(pos_1d(t, k, kTiming), integrate_vel(t, k), 1e-9) << "t=" << t;
  }
}

TEST(TrajModel, AccelerationIsDerivativeOfVelocity) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ut(0.01, kTiming.t_fin - 0.01);
  const double h = 1e-5;
  for (int n = 0; n < 500; ++n) {
    const TrajParam1D k = random_kappa(rng);
    const double t = ut(rng);
    const double fd = (vel_1d(t + h, k, kTiming) - vel_1d(t - h, k, kTiming)) / (2 * h);
    EXPECT_NEAR(acc_1d(t, k, kTiming), fd, 1e-5);
  }
}

TEST(TrajModel, LinearInParameters) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ut(0.0, kTiming.t_fin), us(-2, 2);
  for (int n = 0; n < 500; ++n) {
    const TrajParam1D k1 = random_kappa(rng), k2 = random_kappa(rng);
    const double a = us(rng), b = us(rng), t = ut(rng);
    const TrajParam1D mix{a * k1.kappa_v + b * k2.kappa_v, a * k1.kappa_a + b * k2.kappa_a,
                          a * k1.kappa_pk + b * k2.kappa_pk};
    EXPECT_NEAR(pos_1d(t, mix, kTiming), a * pos_1d(t, k1, kTiming) + b * pos_1d(t, k2, kTiming), 1e-10);
    EXPECT_NEAR(vel_1d(t, mix, kTiming), a * vel_1d(t, k1, kTiming) + b * vel_1d(t, k2, kTiming), 1e-10);
    EXPECT_NEAR(acc_1d(t, mix, kTiming), a * acc_1d(t, k1, kTiming) + b * acc_1d(t, k2, kTiming), 1e-10);
  }
}

TEST(TrajModel, OddAndAxisDecoupled) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ut(0.0, kTiming.t_fin);
  for (int n = 0; n < 200; ++n) {
    TrajParam k;
    for (auto& a : k.axes) a = random_kappa(rng);
    const double t = ut(rng);
    const RefPoint p = ref_point(t, k, kTiming), m = ref_point(t, -k, kTiming);
    EXPECT_TRUE((p.pos + m.pos).isZero(1e-12));
    EXPECT_TRUE((p.vel + m.vel).isZero(1e-12));
    EXPECT_TRUE((p.acc + m.acc).isZero(1e-12));
    TrajParam k2 = k;
    k2.axes[1] = random_kappa(rng);
    const RefPoint q = ref_point(t, k2, kTiming);
    EXPECT_EQ(q.pos[0], p.pos[0]);
    EXPECT_EQ(q.pos[2], p.pos[2]);
    EXPECT_EQ(q.acc[0], p.acc[0]);
  }
  const RefPoint zero = ref_point(1.3, TrajParam{}, kTiming);
  EXPECT_TRUE(zero.pos.isZero(0) && zero.vel.isZero(0) && zero.acc.isZero(0));
}

TEST(AffineCoeffs, ReconstructPositionVelocityAcceleration) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ut(0.0, kTiming.t_fin);
  const AffineCoeffs c0 = affine_pos_coeffs(0.0, kTiming);
  EXPECT_EQ(c0.v, 0.0);
  EXPECT_EQ(c0.a, 0.0);
  EXPECT_EQ(c0.pk, 0.0);
  for (int n = 0; n < 10000; ++n) {
    const TrajParam1D k = random_kappa(rng);
    const double t = ut(rng);
    EXPECT_NEAR(affine_pos_coeffs(t, kTiming).dot(k), pos_1d(t, k, kTiming), 1e-12);
    EXPECT_NEAR(affine_vel_coeffs(t, kTiming).dot(k), vel_1d(t, k, kTiming), 1e-12);
    EXPECT_NEAR(affine_acc_coeffs(t, kTiming).dot(k), acc_1d(t, k, kTiming), 1e-11);
  }
}

TEST(AffineCoeffs, StoppingDisplacement) {
  // With kappa_a = 0 the total displacement is a_v kappa_v + a_pk kappa_pk,
  // and both coefficients equal the quadrature of the basis velocities.
  const AffineCoeffs c = affine_pos_coeffs(kTiming.t_fin, kTiming);
  EXPECT_NEAR(c.v, integrate_vel(kTiming.t_fin, {1.0, 0.0, 0.0}), 1e-12);
  EXPECT_NEAR(c.pk, integrate_vel(kTiming.t_fin, {0.0, 0.0, 1.0}), 1e-12);
  EXPECT_GT(c.pk, 0.0);
}

TEST(Feasibility, NormConstraints) {
  const double v_max = 5.0, a_max = 3.0;
  EXPECT_TRUE(is_feasible(Vec3(3, 2, 1), Vec3(3, 2, 1), kTiming, v_max, a_max));
  EXPECT_FALSE(is_feasible(Vec3::Zero(), Vec3(3.1, 0, 0), kTiming, v_max, a_max));
  EXPECT_TRUE(is_feasible(Vec3::Zero(), Vec3(3.0, 0, 0), kTiming, v_max, a_max));
  EXPECT_FALSE(is_feasible(Vec3(4, 0, 0), Vec3(5.1, 0, 0), kTiming, v_max, a_max));
  const TrajParam k = TrajParam::from_vectors(Vec3(4, 0, 0), Vec3(8, 0, 0), Vec3(4, 3, 0));
  EXPECT_TRUE(is_feasible(k, kTiming, v_max, a_max));
}

TEST(TrajParam, ArrayAndBounds) {
  const TrajParam k = TrajParam::from_vectors(Vec3(1, 2, 3), Vec3(4, 5, 6), Vec3(-1, -2, -3));
  EXPECT_TRUE(k.k_a().isApprox(Vec3(4, 5, 6)));
  const auto arr = k.to_array();
  const TrajParam back = TrajParam::from_array(arr);
  EXPECT_EQ(back.to_array(), arr);
  EXPECT_TRUE(k.within(ParamBounds{}));
  EXPECT_FALSE(TrajParam::from_vectors(Vec3(6, 0, 0), Vec3::Zero(), Vec3::Zero()).within(ParamBounds{}));
}
