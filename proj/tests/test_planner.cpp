#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rtd/planner.hpp"
#include "rtd/verify.hpp"

using namespace rtd;

namespace {

const TrajTiming kTiming;
const QuadParams kQuad;
const Box3 kBody(Vec3::Zero(), Vec3::Constant(0.27));

const TimedFRS& frs() {
  static const TimedFRS f = reach_3d(ParamBounds{}, kTiming, 0.02);
  return f;
}

PlannerConfig deterministic_config() {
  PlannerConfig c;
  c.budget.wall_seconds = 0.0;
  return c;
}

InitialCondition hover_ic(const Vec3& x0) {
  InitialCondition ic;
  ic.x0 = x0;
  ic.predicted = QuadState::at_rest(x0);
  return ic;
}

const Box3 kBigWorld = Box3::from_bounds(Vec3(-100, -100, -100), Vec3(100, 100, 100));

}  // namespace

TEST(Sensing, NearestPointWithinHorizon) {
  const std::vector<Obstacle> world{Box3(Vec3(20, 0, 0), Vec3::Constant(0.5)),   // nearest point 19.5
                                    Box3(Vec3(12.5, 0, 0), Vec3::Constant(0.5)),  // touches the sphere
                                    Box3(Vec3(0, 5, 0), Vec3::Constant(1.0))};
  const auto sensed = sense_obstacles(Vec3::Zero(), Vec3(1, 0, 0), world, kBigWorld, 12.0);
  // two obstacles plus six boundary slabs, shifted into the frame at (1, 0, 0)
  ASSERT_EQ(sensed.size(), 2u + 6u);
  EXPECT_TRUE(sensed[0].center.isApprox(Vec3(11.5, 0, 0)));
  EXPECT_TRUE(sensed[1].center.isApprox(Vec3(-1, 5, 0)));
  EXPECT_LE(sensed.size(), world.size() + 6);
}

TEST(Sensing, BoundarySlabsEncloseBounds) {
  const Box3 bounds = Box3::from_bounds(Vec3(0, 0, 0), Vec3(10, 4, 2));
  const auto slabs = boundary_slabs(bounds, 1.0);
  ASSERT_EQ(slabs.size(), 6u);
  for (const Box3& s : slabs) {
    // slabs touch the bounds but never enter the interior
    EXPECT_TRUE(s.intersects(bounds));
    EXPECT_FALSE(s.contains(bounds.center));
  }
  // every point just outside the bounds is inside some slab
  for (const Vec3& p : {Vec3(-0.5, 2, 1), Vec3(10.5, 2, 1), Vec3(5, -0.5, 1), Vec3(5, 4.5, 1), Vec3(5, 2, -0.5),
                        Vec3(5, 2, 2.5)}) {
    bool inside = false;
    for (const Box3& s : slabs) inside |= s.contains(p);
    EXPECT_TRUE(inside) << p.transpose();
  }
}

TEST(InitialCondition, HoverIsZero) {
  EXPECT_TRUE(acceleration_from_thrust(QuadState::at_rest(Vec3::Zero()), kQuad.mass * kQuad.gravity, kQuad)
                  .isZero(0));
  const Plan hover = Plan::hover(Vec3(1, 2, 3), kTiming);
  TrackingController ctrl(Gains{}, kQuad);
  const auto ic = initial_condition(QuadState::at_rest(Vec3(1, 2, 3)), 0.0, hover, ctrl, 150, 0.005, kQuad);
  ASSERT_TRUE(ic.has_value());
  EXPECT_TRUE(ic->k_v.isZero(1e-9));
  EXPECT_TRUE(ic->k_a.isZero(1e-9));
  EXPECT_TRUE(ic->x0.isApprox(Vec3(1, 2, 3)));
}

TEST(InitialCondition, PredictionMatchesExecution) {
  const TrajParam k = TrajParam::from_vectors(Vec3::Zero(), Vec3::Zero(), Vec3(2, -1, 0.5));
  const Plan plan{k, kTiming, Vec3(3, 3, 3), 0.0};
  TrackingController ctrl(Gains{}, kQuad);
  QuadState s = QuadState::at_rest(Vec3(3, 3, 3));
  const auto ic = initial_condition(s, 0.0, plan, ctrl, 150, 0.005, kQuad);
  ASSERT_TRUE(ic.has_value());
  execute_plan(s, 0.0, 150, 0.005, ctrl, plan, kQuad);
  EXPECT_EQ(ic->predicted.x, s.x);
  EXPECT_EQ(ic->k_v, s.v);
  // and the executed position tracks the reference within the error bound
  EXPECT_LE((s.x - plan.reference(0.75).pos).norm(), 0.1);
}

TEST(ErrorAugment, ZeroErrorAndBodyLeaveFrsUnchanged) {
  const auto aug = error_augment(frs(), ErrorModel::constant(0.0), Vec3::Zero(), Box3());
  ASSERT_EQ(aug.size(), frs().steps.size());
  for (std::size_t s = 0; s < aug.size(); s += 7) {
    for (int axis = 0; axis < 3; ++axis) {
      const BlockCoeffs a = extract_block(aug[s].zono, axis), b = extract_block(frs().steps[s].zono, axis);
      EXPECT_EQ(a.c_x, b.c_x);
      EXPECT_EQ(a.g_xpk, b.g_xpk);
      EXPECT_EQ(a.eps, b.eps);
    }
  }
}

TEST(ErrorAugment, BodyGrowsEpsByHalfWidth) {
  const auto aug = error_augment(frs(), ErrorModel::constant(0.0), Vec3::Zero(), kBody);
  for (std::size_t s = 0; s < aug.size(); ++s) {
    for (int axis = 0; axis < 3; ++axis) {
      const BlockCoeffs a = extract_block(aug[s].zono, axis), b = extract_block(frs().steps[s].zono, axis);
      EXPECT_NEAR(a.eps, b.eps + 0.27, 1e-15);
      EXPECT_EQ(a.c_x, b.c_x);
    }
  }
}

TEST(ErrorAugment, AsymmetricTableBoxShiftsCenter) {
  // one-cell, one-bin table holding an asymmetric box
  CoverSpec spec;
  spec.dv = 10.0;
  spec.dt = 3.0;
  ErrorBox box;
  box.lo = Vec3(-0.01, -0.05, 0.02);
  box.hi = Vec3(0.03, 0.05, 0.06);
  auto table = std::make_shared<const TrackingErrorTable>(spec, kTiming, std::vector<ErrorBox>{box}, TableMetadata{});
  const auto aug = error_augment(frs(), ErrorModel::table(table), Vec3::Zero(), Box3());
  const Box3 b = box.box();
  for (std::size_t s = 0; s < aug.size(); s += 11) {
    for (int axis = 0; axis < 3; ++axis) {
      const Interval got = project_interval(aug[s].zono, aug[s].zono.row_of(Quantity::kPosition, axis));
      const Interval base =
          project_interval(frs().steps[s].zono, frs().steps[s].zono.row_of(Quantity::kPosition, axis));
      EXPECT_NEAR(got.lo, base.lo + b.lo()[axis], 1e-12);
      EXPECT_NEAR(got.hi, base.hi + b.hi()[axis], 1e-12);
      const BlockCoeffs a = extract_block(aug[s].zono, axis);
      const BlockCoeffs o = extract_block(frs().steps[s].zono, axis);
      EXPECT_NEAR(a.c_x - o.c_x, b.center[axis], 1e-15);
      EXPECT_NEAR(a.eps - o.eps, b.half_extents[axis], 1e-15);
    }
  }
}

TEST(IntersectObs, FarObstacleIsEmpty) {
  const auto aug = error_augment(frs(), ErrorModel::constant(0.1), Vec3::Zero(), kBody);
  const Obstacle far(Vec3(100, 0, 0), Vec3::Constant(1.0));
  for (const auto& st : aug) EXPECT_FALSE(intersect_obs(st.zono, far, Vec3::Zero(), Vec3::Zero()).has_value());
}

TEST(IntersectObs, CoveringObstacleGivesWholeSlice) {
  const auto aug = error_augment(frs(), ErrorModel::constant(0.1), Vec3(1, 0, 0), kBody);
  const Obstacle huge(Vec3::Zero(), Vec3::Constant(1000.0));
  const auto box = intersect_obs(aug[100].zono, huge, Vec3(1, 0, 0), Vec3::Zero());
  ASSERT_TRUE(box.has_value());
  for (int i = 0; i < 3; ++i) {
    const BlockCoeffs b = extract_block(aug[100].zono, i);
    EXPECT_NEAR(box->lo()[i], b.c_pk - std::abs(b.g_pk), 1e-12);
    EXPECT_NEAR(box->hi()[i], b.c_pk + std::abs(b.g_pk), 1e-12);
  }
}

TEST(IntersectObs, OutsideSliceThrows) {
  const BlockCoeffs b = extract_block(frs().steps[20].zono, 0);
  EXPECT_THROW(unsafe_interval_1d(b, Interval(0, 1), 6.0, 0.0), std::domain_error);
}

TEST(IntersectObs, GridOracle) {
  UnsafeBoxStats stats;
  const CheckResult r = check_unsafe_boxes(frs(), 12, 0.05, 77, &stats);
  EXPECT_TRUE(r.pass) << r.detail;
  EXPECT_EQ(stats.missed, 0);
  EXPECT_EQ(stats.uncovered, 0);
  EXPECT_GT(stats.nonempty, 0);
}

TEST(Constraints, BlockValuesMatchGeometry) {
  const Box3 box(Vec3(1, -2, 0.5), Vec3(0.4, 0.3, 0.2));
  const ConstraintSet cs = generate_constraints({UnsafeBox{box, 0, 0}});
  ASSERT_EQ(cs.num_blocks(), 1);
  ASSERT_EQ(cs.A.rows(), 6);
  EXPECT_NEAR(cs.block_min(0, box.center), 0.2, 1e-15);
  EXPECT_NEAR(cs.block_min(0, box.center + Vec3(0.4 + 0.25, 0, 0)), -0.25, 1e-15);
  EXPECT_FALSE(is_safe(box.center, cs));
  EXPECT_FALSE(is_safe(box.hi(), cs));  // closed box
  EXPECT_TRUE(is_safe(box.hi() + Vec3(1e-9, 0, 0), cs));
  EXPECT_TRUE(is_safe(Vec3(100, 0, 0), ConstraintSet{}));
}

TEST(Constraints, AgreeWithUnionMembership) {
  const CheckResult r = check_constraints(100, 1000, 5);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Optimize, UnconstrainedMatchesSampleArgmin) {
  const Vec3 k_v(1, 0.5, 0);
  const Vec3 target(4, 3, 1);
  const auto cost = [&](const Vec3& k) { return (k - target).squaredNorm(); };
  Budget budget;
  budget.wall_seconds = 0.0;
  const OptimizeResult r = optimize(cost, ConstraintSet{}, k_v, kTiming, 5.0, 3.0, 10000, budget);
  ASSERT_TRUE(r.k_pk.has_value());
  // brute force over the same samples
  const double radius = std::min(5.0, 3.0 * kTiming.t_pk);
  double best = INFINITY;
  Vec3 arg;
  for (const Vec3& u : unit_ball_samples(10000)) {
    const Vec3 k = k_v + radius * u;
    if (!is_feasible(k_v, k, kTiming, 5.0, 3.0)) continue;
    if (cost(k) < best) {
      best = cost(k);
      arg = k;
    }
  }
  EXPECT_EQ(*r.k_pk, arg);
  EXPECT_GT(r.num_samples, 9000);
  EXPECT_LE(r.num_samples, 10000);
}

TEST(Optimize, AllUnsafeGivesNothing) {
  const ConstraintSet cs = generate_constraints({UnsafeBox{Box3(Vec3::Zero(), Vec3::Constant(20.0)), 0, 0}});
  Budget budget;
  budget.wall_seconds = 0.0;
  const OptimizeResult r = optimize([](const Vec3& k) { return k.norm(); }, cs, Vec3::Zero(), kTiming, 5.0, 3.0,
                                    2000, budget);
  EXPECT_FALSE(r.k_pk.has_value());
}

TEST(Optimize, BatchBudgetIsRespected) {
  const ConstraintSet cs = generate_constraints({UnsafeBox{Box3(Vec3::Zero(), Vec3::Constant(20.0)), 0, 0}});
  Budget budget;
  budget.wall_seconds = 0.0;
  budget.max_batches = 2;
  const OptimizeResult r = optimize([](const Vec3& k) { return k.norm(); }, cs, Vec3::Zero(), kTiming, 5.0, 3.0,
                                    10000, budget);
  EXPECT_FALSE(r.k_pk.has_value());
  EXPECT_TRUE(r.budget_exhausted);
  EXPECT_LE(r.num_evaluated, 2 * budget.batch_size);
}

TEST(Optimize, UnitBallSamplesAreDeterministicAndInside) {
  const auto& a = unit_ball_samples(3000);
  const auto& b = unit_ball_samples(3000);
  EXPECT_EQ(&a, &b);
  for (const Vec3& u : a) EXPECT_LE(u.norm(), 1.0);
  EXPECT_EQ(a.size(), 3000u);
}

TEST(PlanIteration, EmptyWorldHeadsToWaypoint) {
  PlanningProblem p{hover_ic(Vec3::Zero()), Vec3::Zero(), Vec3(50, 0, 0), nullptr, kBigWorld};
  const IterationResult r = plan_iteration(p, frs(), ErrorModel::constant(0.1), deterministic_config());
  ASSERT_TRUE(r.k.has_value());
  EXPECT_EQ(r.num_obstacles, 6);
  EXPECT_EQ(r.num_unsafe_boxes, 0);
  // from hover the acceleration limit binds: |k_pk| = a_max t_pk straight at the goal
  const Vec3 k_pk = r.k->k_pk();
  EXPECT_GT(k_pk[0], 2.8);
  EXPECT_LT(std::abs(k_pk[1]) + std::abs(k_pk[2]), 0.3);
}

TEST(PlanIteration, UnstoppableBeforeWallFallsBackToFailSafe) {
  // at 4 m/s the peak speed is at least 1 m/s, so the vehicle covers more than 2 m before t_pk
  const std::vector<Obstacle> wall{Box3(Vec3(2.0, 0, 0), Vec3(0.1, 20, 20))};
  InitialCondition ic = hover_ic(Vec3::Zero());
  ic.k_v = Vec3(4, 0, 0);
  PlanningProblem p{ic, Vec3::Zero(), Vec3(50, 0, 0), &wall, kBigWorld};
  const IterationResult r = plan_iteration(p, frs(), ErrorModel::constant(0.1), deterministic_config());
  EXPECT_FALSE(r.k.has_value());
  EXPECT_GT(r.num_unsafe_boxes, 0);

  // from hover a slow plan short of the wall exists
  p.ic.k_v = Vec3::Zero();
  const IterationResult h = plan_iteration(p, frs(), ErrorModel::constant(0.1), deterministic_config());
  ASSERT_TRUE(h.k.has_value());
  for (const Box3& e : h.slice_extents) EXPECT_FALSE(e.intersects(wall[0]));
}

TEST(PlanIteration, ChosenPlanClearsEverySensedObstacle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  int planned = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Obstacle> world;
    for (int j = 0; j < 25; ++j) {
      const Vec3 c(2 + 10 * std::abs(u(rng)), 6 * u(rng), 3 * u(rng));
      if (c.norm() < 2.0) continue;
      world.emplace_back(c, Vec3(0.3 + std::abs(u(rng)), 0.3 + std::abs(u(rng)), 0.3 + std::abs(u(rng))));
    }
    InitialCondition ic = hover_ic(Vec3::Zero());
    ic.k_v = Vec3(2 * u(rng) + 2, u(rng), 0.5 * u(rng));
    PlanningProblem p{ic, Vec3::Zero(), Vec3(40, 0, 0), &world, kBigWorld};
    PlannerConfig cfg = deterministic_config();
    const IterationResult r = plan_iteration(p, frs(), ErrorModel::constant(0.1), cfg);
    if (!r.k) continue;
    ++planned;
    // replay: the reference position plus per-step eps and body never meets an obstacle
    const auto aug = error_augment(frs(), ErrorModel::constant(0.1), ic.k_v, cfg.body);
    const auto sensed = sense_obstacles(p.sensor, ic.x0, world, kBigWorld, cfg.d_sense, cfg.wall_thickness);
    for (std::size_t s = 0; s < aug.size(); ++s) {
      const std::array<BlockCoeffs, 3> blocks{extract_block(aug[s].zono, 0), extract_block(aug[s].zono, 1),
                                              extract_block(aug[s].zono, 2)};
      const Box3 extent = slice_extent(blocks, *r.k);
      ASSERT_LT((extent.center - r.slice_extents[s].center).norm(), 1e-12);
      ASSERT_LT((extent.half_extents - r.slice_extents[s].half_extents).norm(), 1e-12);
      for (int n = 0; n <= 4; ++n) {
        const double t = aug[s].t_interval.lo + aug[s].t_interval.width() * n / 4.0;
        const Vec3 x = ref_point(t, *r.k, kTiming).pos;
        ASSERT_TRUE(extent.contains(x, 1e-12));
      }
      for (const Obstacle& o : sensed) ASSERT_FALSE(extent.intersects(o)) << "step " << s;
    }
  }
  EXPECT_GT(planned, 10);
}

TEST(PlanIteration, TranslationInvariant) {
  std::vector<Obstacle> world{Box3(Vec3(4, 0.5, 0), Vec3(0.5, 1, 1)), Box3(Vec3(6, -2, 1), Vec3(1, 1, 0.5))};
  InitialCondition ic = hover_ic(Vec3::Zero());
  ic.k_v = Vec3(2, 0, 0);
  PlanningProblem p{ic, Vec3::Zero(), Vec3(30, 0, 0), &world, kBigWorld};
  const IterationResult a = plan_iteration(p, frs(), ErrorModel::constant(0.1), deterministic_config());

  const Vec3 shift(16, -8, 4);
  std::vector<Obstacle> moved;
  for (const Obstacle& o : world) moved.push_back(o.translated(shift));
  InitialCondition ic2 = ic;
  ic2.x0 += shift;
  PlanningProblem q{ic2, shift, Vec3(30, 0, 0) + shift, &moved, kBigWorld.translated(shift)};
  const IterationResult b = plan_iteration(q, frs(), ErrorModel::constant(0.1), deterministic_config());
  ASSERT_TRUE(a.k.has_value());
  ASSERT_TRUE(b.k.has_value());
  EXPECT_EQ(a.k->k_pk(), b.k->k_pk());
}

TEST(PlanIteration, DeterministicAcrossRuns) {
  std::vector<Obstacle> world{Box3(Vec3(5, 0, 0), Vec3(0.5, 2, 2))};
  PlanningProblem p{hover_ic(Vec3::Zero()), Vec3::Zero(), Vec3(30, 0, 0), &world, kBigWorld};
  const auto a = plan_iteration(p, frs(), ErrorModel::constant(0.1), deterministic_config());
  const auto b = plan_iteration(p, frs(), ErrorModel::constant(0.1), deterministic_config());
  ASSERT_TRUE(a.k && b.k);
  EXPECT_EQ(a.k->k_pk(), b.k->k_pk());
}

TEST(PlanIteration, DebugDump) {
  PlannerConfig cfg = deterministic_config();
  cfg.debug = true;
  PlanningProblem p{hover_ic(Vec3::Zero()), Vec3::Zero(), Vec3(30, 0, 0), nullptr, kBigWorld};
  const auto r = plan_iteration(p, frs(), ErrorModel::constant(0.1), cfg);
  for (const char* key : {"sensed_obstacles", "constraint_blocks", "samples", "k_pk", "fail_safe"})
    EXPECT_TRUE(r.debug.contains(key)) << key;
  EXPECT_FALSE(r.debug["fail_safe"].get<bool>());
}
