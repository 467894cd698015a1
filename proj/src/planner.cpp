#include "rtd/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "rtd/artifact.hpp"

namespace rtd {

namespace {

constexpr double kDegenerateGain = 1e-12;

nlohmann::json vec_json(const Vec3& v) { return {v[0], v[1], v[2]}; }

nlohmann::json box_json(const Box3& b) {
  return {{"lo", vec_json(b.lo())}, {"hi", vec_json(b.hi())}};
}

}  // namespace

std::vector<Obstacle> boundary_slabs(const Box3& bounds, double wall) {
  std::vector<Obstacle> out;
  const Vec3 lo = bounds.lo(), hi = bounds.hi();
  for (int i = 0; i < 3; ++i) {
    Vec3 slo = lo.array() - wall, shi = hi.array() + wall;
    shi[i] = lo[i];
    out.push_back(Box3::from_bounds(slo, shi));
    slo = lo.array() - wall;
    shi = hi.array() + wall;
    slo[i] = hi[i];
    out.push_back(Box3::from_bounds(slo, shi));
  }
  return out;
}

std::vector<Obstacle> sense_obstacles(const Vec3& sensor, const Vec3& frame_origin,
                                      const std::vector<Obstacle>& world_obstacles,
                                      const Box3& bounds, double d_sense, double wall) {
  std::vector<Obstacle> out;
  for (const Obstacle& o : world_obstacles)
    if (o.distance_to(sensor) <= d_sense) out.push_back(o.translated(-frame_origin));
  for (const Obstacle& o : boundary_slabs(bounds, wall)) out.push_back(o.translated(-frame_origin));
  return out;
}

RefPoint Plan::reference(double t) const {
  RefPoint r = ref_point_clamped(t - t_start, k, timing);
  r.pos += x0;
  return r;
}

Plan Plan::hover(const Vec3& x0, const TrajTiming& timing, double t_start) {
  return Plan{TrajParam{}, timing, x0, t_start};
}

int execute_plan(QuadState& s, double t0, int steps, double dt, TrackingController& ctrl,
                 const Plan& plan, const QuadParams& p,
                 const std::function<bool(double, const QuadState&)>& on_step) {
  const Reference ref = [&plan](double t) { return plan.reference(t); };
  for (int n = 0; n < steps; ++n) {
    const double t = t0 + n * dt;
    s = step_lie_euler(s, saturate(ctrl.control(t, ref, s), p), p, dt);
    if (!s.is_finite()) throw std::runtime_error("execute_plan: non-finite state");
    if (on_step && !on_step(t0 + (n + 1) * dt, s)) return n + 1;
  }
  return steps;
}

Vec3 acceleration_from_thrust(const QuadState& s, double thrust, const QuadParams& p) {
  return thrust / p.mass * s.R.col(2) - p.gravity * Vec3::UnitZ();
}

std::optional<InitialCondition> initial_condition(const QuadState& s, double t, const Plan& prev,
                                                  const TrackingController& ctrl, int steps,
                                                  double dt, const QuadParams& p) {
  TrackingController c = ctrl;
  QuadState pred = s;
  try {
    execute_plan(pred, t, steps, dt, c, prev, p);
  } catch (const std::runtime_error&) {
    return std::nullopt;
  }
  const Reference ref = [&prev](double tt) { return prev.reference(tt); };
  const Wrench u = saturate(c.control(t + steps * dt, ref, pred), p);
  InitialCondition ic;
  ic.k_v = pred.v;
  ic.k_a = acceleration_from_thrust(pred, u.thrust, p);
  ic.x0 = pred.x;
  ic.predicted = pred;
  if (!ic.k_v.allFinite() || !ic.k_a.allFinite()) return std::nullopt;
  return ic;
}

ErrorModel ErrorModel::constant(double half_width) {
  if (!(half_width >= 0)) throw std::invalid_argument("constant error must be non-negative");
  ErrorModel m;
  m.half_width_ = half_width;
  return m;
}

ErrorModel ErrorModel::table(std::shared_ptr<const TrackingErrorTable> table) {
  if (!table) throw std::invalid_argument("ErrorModel::table: null table");
  ErrorModel m;
  m.table_ = std::move(table);
  return m;
}

ErrorBox ErrorModel::bound(const Interval& step, const Vec3& k_v) const {
  if (table_) return table_->query_interval(step, k_v);
  return ErrorBox::symmetric(half_width_);
}

void ErrorModel::check_compatible(const TimedFRS& frs) const {
  if (!table_) return;
  if (std::abs(table_->timing().t_fin - frs.timing.t_fin) > 1e-12 ||
      std::abs(table_->timing().t_pk - frs.timing.t_pk) > 1e-12)
    throw ArtifactError("error table and FRS were built for different timing");
}

Zonotope make_block(const BlockCoeffs& b) {
  Eigen::VectorXd c(4);
  c << b.c_x, b.c_v, b.c_a, b.c_pk;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(4, 4);
  G(0, kColV) = b.g_xv;
  G(0, kColA) = b.g_xa;
  G(0, kColPk) = b.g_xpk;
  G(0, kColEps) = b.eps;
  G(1, kColV) = b.g_v;
  G(2, kColA) = b.g_a;
  G(3, kColPk) = b.g_pk;
  return Zonotope(c, G,
                  {{Quantity::kPosition, 0},
                   {Quantity::kInitialVelocity, 0},
                   {Quantity::kInitialAcceleration, 0},
                   {Quantity::kPeakVelocity, 0}});
}

std::vector<TimedZonotope> error_augment(const TimedFRS& frs, const ErrorModel& error,
                                         const Vec3& k_v, const Box3& body) {
  error.check_compatible(frs);
  std::vector<TimedZonotope> out;
  out.reserve(frs.steps.size());
  for (const TimedZonotope& step : frs.steps) {
    const std::array<int, 3> rows{step.zono.row_of(Quantity::kPosition, 0),
                                  step.zono.row_of(Quantity::kPosition, 1),
                                  step.zono.row_of(Quantity::kPosition, 2)};
    const Zonotope summed =
        add_box(add_box(step.zono, error.bound(step.t_interval, k_v).box(), rows), body, rows);
    out.push_back({step.t_interval, block_concat(make_block(extract_block(summed, 0)),
                                                 make_block(extract_block(summed, 1)),
                                                 make_block(extract_block(summed, 2)))});
  }
  return out;
}

bool in_parameter_slice(const std::array<BlockCoeffs, 3>& blocks, const Vec3& k_v, const Vec3& k_a,
                        double tol) {
  for (int i = 0; i < 3; ++i) {
    const BlockCoeffs& b = blocks[i];
    if (std::abs(k_v[i] - b.c_v) > std::abs(b.g_v) + tol) return false;
    if (std::abs(k_a[i] - b.c_a) > std::abs(b.g_a) + tol) return false;
  }
  return true;
}

std::optional<Interval> unsafe_interval_1d(const BlockCoeffs& b, const Interval& obstacle,
                                           double kappa_v, double kappa_a) {
  const double beta_v = (kappa_v - b.c_v) / b.g_v;
  const double beta_a = (kappa_a - b.c_a) / b.g_a;
  if (std::abs(beta_v) > 1 + 1e-9 || std::abs(beta_a) > 1 + 1e-9)
    throw std::domain_error("initial condition outside the FRS parameter slice");
  const double x_c = b.c_x + b.g_xv * beta_v + b.g_xa * beta_a;
  const Interval full(b.c_pk - std::abs(b.g_pk), b.c_pk + std::abs(b.g_pk));

  if (std::abs(b.g_xpk) <= kDegenerateGain) {
    // Position barely depends on kappa_pk: the whole slice is unsafe iff its
    // reachable interval meets the obstacle.
    const double reach = b.eps + std::abs(b.g_xpk);
    return Interval(x_c - reach, x_c + reach).overlaps(obstacle) ? std::optional(full) : std::nullopt;
  }
  double beta_lo = (obstacle.lo - b.eps - x_c) / b.g_xpk;
  double beta_hi = (obstacle.hi + b.eps - x_c) / b.g_xpk;
  if (beta_lo > beta_hi) std::swap(beta_lo, beta_hi);
  if (beta_lo > 1.0 || beta_hi < -1.0) return std::nullopt;
  beta_lo = std::max(beta_lo, -1.0);
  beta_hi = std::min(beta_hi, 1.0);
  double k_lo = b.c_pk + b.g_pk * beta_lo, k_hi = b.c_pk + b.g_pk * beta_hi;
  if (k_lo > k_hi) std::swap(k_lo, k_hi);
  return Interval(k_lo, k_hi);
}

std::optional<Box3> intersect_obs(const std::array<BlockCoeffs, 3>& blocks, const Obstacle& o,
                                  const Vec3& k_v, const Vec3& k_a) {
  Vec3 lo, hi;
  for (int i = 0; i < 3; ++i) {
    const auto iv = unsafe_interval_1d(blocks[i], o.axis(i), k_v[i], k_a[i]);
    if (!iv) return std::nullopt;
    lo[i] = iv->lo;
    hi[i] = iv->hi;
  }
  return Box3::from_bounds(lo, hi);
}

std::optional<Box3> intersect_obs(const Zonotope& zeps, const Obstacle& o, const Vec3& k_v,
                                  const Vec3& k_a) {
  return intersect_obs({extract_block(zeps, 0), extract_block(zeps, 1), extract_block(zeps, 2)}, o,
                       k_v, k_a);
}

double ConstraintSet::block_min(int j, const Vec3& k_pk) const {
  return (A.middleRows<6>(6 * j) * k_pk + b.segment<6>(6 * j)).minCoeff();
}

ConstraintSet generate_constraints(const std::vector<UnsafeBox>& unsafe) {
  ConstraintSet cs;
  const int n = static_cast<int>(unsafe.size());
  cs.A.setZero(6 * n, 3);
  cs.b.resize(6 * n);
  for (int j = 0; j < n; ++j) {
    const Box3& box = unsafe[j].box;
    for (int i = 0; i < 3; ++i) {
      cs.A(6 * j + 2 * i, i) = 1.0;
      cs.A(6 * j + 2 * i + 1, i) = -1.0;
      cs.b(6 * j + 2 * i) = box.half_extents[i] - box.center[i];
      cs.b(6 * j + 2 * i + 1) = box.half_extents[i] + box.center[i];
    }
  }
  return cs;
}

bool is_safe(const Vec3& k_pk, const ConstraintSet& constraints) {
  if (constraints.b.size() == 0) return true;
  const Eigen::VectorXd v = constraints.A * k_pk + constraints.b;
  const int n = constraints.num_blocks();
  for (int j = 0; j < n; ++j)
    if (v.segment<6>(6 * j).minCoeff() >= 0.0) return false;
  return true;
}

namespace {

double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

}  // namespace

const std::vector<Vec3>& unit_ball_samples(int n) {
  static std::mutex mutex;
  static std::map<int, std::vector<Vec3>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<Vec3> pts;
  pts.reserve(std::max(n, 0));
  for (std::uint64_t i = 1; static_cast<int>(pts.size()) < n; ++i) {
    const Vec3 u(2.0 * radical_inverse(i, 2) - 1.0, 2.0 * radical_inverse(i, 3) - 1.0,
                 2.0 * radical_inverse(i, 5) - 1.0);
    if (u.squaredNorm() <= 1.0) pts.push_back(u);
  }
  return cache.emplace(n, std::move(pts)).first->second;
}

OptimizeResult optimize(const std::function<double(const Vec3&)>& cost, const ConstraintSet& constraints,
                        const Vec3& k_v, const TrajTiming& timing, double v_max, double a_max,
                        int num_samples, const Budget& budget,
                        const std::function<bool(const Vec3&)>& accept) {
  const auto start = std::chrono::steady_clock::now();
  const double radius = std::min(v_max, a_max * timing.t_pk);
  const auto& unit = unit_ball_samples(num_samples);

  OptimizeResult res;
  res.num_samples = static_cast<int>(unit.size());
  std::vector<Vec3> candidates;
  std::vector<double> costs;
  candidates.reserve(unit.size());
  for (const Vec3& u : unit) {
    const Vec3 k = k_v + radius * u;
    if (!is_feasible(k_v, k, timing, v_max, a_max)) continue;
    candidates.push_back(k);
    costs.push_back(cost(k));
  }
  res.num_feasible = static_cast<int>(candidates.size());
  std::vector<int> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return costs[a] < costs[b]; });

  const int batch = std::max(1, budget.batch_size);
  for (std::size_t first = 0, b = 0; first < order.size(); first += batch, ++b) {
    if (budget.max_batches >= 0 && static_cast<int>(b) >= budget.max_batches) {
      res.budget_exhausted = true;
      return res;
    }
    if (budget.wall_seconds > 0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >
            budget.wall_seconds) {
      res.budget_exhausted = true;
      return res;
    }
    const std::size_t last = std::min(order.size(), first + batch);
    for (std::size_t i = first; i < last; ++i) {
      ++res.num_evaluated;
      if (is_safe(candidates[order[i]], constraints) && (!accept || accept(candidates[order[i]]))) {
        res.k_pk = candidates[order[i]];
        return res;
      }
    }
  }
  return res;
}

Vec3 waypoint_toward(const Vec3& x0, const Vec3& goal, double distance) {
  const Vec3 d = goal - x0;
  const double n = d.norm();
  if (n <= distance) return goal;
  return x0 + d * (distance / n);
}

Box3 slice_extent(const std::array<BlockCoeffs, 3>& blocks, const TrajParam& k) {
  Vec3 lo, hi;
  for (int i = 0; i < 3; ++i) {
    const BlockCoeffs& b = blocks[i];
    const double x = b.c_x + b.g_xv * (k.axes[i].kappa_v - b.c_v) / b.g_v +
                     b.g_xa * (k.axes[i].kappa_a - b.c_a) / b.g_a +
                     b.g_xpk * (k.axes[i].kappa_pk - b.c_pk) / b.g_pk;
    lo[i] = x - b.eps;
    hi[i] = x + b.eps;
  }
  return Box3::from_bounds(lo, hi);
}

IterationResult plan_iteration(const PlanningProblem& problem, const TimedFRS& frs,
                               const ErrorModel& error, const PlannerConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  IterationResult res;
  const InitialCondition& ic = problem.ic;
  static const std::vector<Obstacle> kNone;
  const auto obstacles =
      sense_obstacles(problem.sensor, ic.x0, problem.world_obstacles ? *problem.world_obstacles : kNone,
                      problem.world_bounds, config.d_sense, config.wall_thickness);
  res.num_obstacles = static_cast<int>(obstacles.size());

  const auto zeps = error_augment(frs, error, ic.k_v, config.body);
  std::vector<std::array<BlockCoeffs, 3>> blocks;
  blocks.reserve(zeps.size());
  for (const TimedZonotope& z : zeps)
    blocks.push_back({extract_block(z.zono, 0), extract_block(z.zono, 1), extract_block(z.zono, 2)});

  auto finish = [&] {
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (config.debug) {
      nlohmann::json obs = nlohmann::json::array();
      for (const Obstacle& o : obstacles) obs.push_back(box_json(o));
      res.debug = {{"x0", vec_json(ic.x0)},
                   {"k_v", vec_json(ic.k_v)},
                   {"k_a", vec_json(ic.k_a)},
                   {"sensed_obstacles", obs},
                   {"constraint_blocks", res.num_unsafe_boxes},
                   {"samples", res.opt.num_samples},
                   {"feasible_samples", res.opt.num_feasible},
                   {"evaluated_samples", res.opt.num_evaluated},
                   {"budget_exhausted", res.opt.budget_exhausted},
                   {"outside_slice", res.outside_slice},
                   {"k_pk", res.k ? vec_json(res.k->k_pk()) : nlohmann::json(nullptr)},
                   {"fail_safe", !res.k.has_value()},
                   {"seconds", res.seconds}};
    }
    return res;
  };

  for (const auto& b : blocks)
    if (!in_parameter_slice(b, ic.k_v, ic.k_a)) {
      res.outside_slice = true;
      return finish();
    }

  // Only unsafe boxes that reach the sample ball matter.
  const double radius = std::min(config.v_max, config.a_max * config.timing.t_pk);
  const Box3 sample_box(ic.k_v, Vec3::Constant(radius));
  std::vector<UnsafeBox> unsafe;
  for (std::size_t s = 0; s < blocks.size(); ++s)
    for (std::size_t j = 0; j < obstacles.size(); ++j) {
      const auto box = intersect_obs(blocks[s], obstacles[j], ic.k_v, ic.k_a);
      if (box && box->intersects(sample_box))
        unsafe.push_back({*box, static_cast<int>(s), static_cast<int>(j)});
    }
  res.num_unsafe_boxes = static_cast<int>(unsafe.size());
  const ConstraintSet constraints = generate_constraints(unsafe);

  const Vec3 waypoint = waypoint_toward(ic.x0, problem.goal, config.waypoint_distance) - ic.x0;
  const AffineCoeffs a = affine_pos_coeffs(config.timing.t_pk, config.timing);
  const Vec3 fixed = a.v * ic.k_v + a.a * ic.k_a;
  const auto cost = [&](const Vec3& k_pk) { return (fixed + a.pk * k_pk - waypoint).squaredNorm(); };

  const Vec3 sensor_local = problem.sensor - ic.x0;
  const auto within_horizon = [&](const Vec3& k_pk) {
    const TrajParam k = TrajParam::from_vectors(ic.k_v, ic.k_a, k_pk);
    for (const auto& b : blocks) {
      const Box3 e = slice_extent(b, k);
      const Vec3 far = (e.center - sensor_local).cwiseAbs() + e.half_extents;
      if (far.norm() > config.d_sense) return false;
    }
    return true;
  };
  res.opt = optimize(cost, constraints, ic.k_v, config.timing, config.v_max, config.a_max,
                     config.num_samples, config.budget,
                     config.horizon_check ? std::function<bool(const Vec3&)>(within_horizon)
                                          : std::function<bool(const Vec3&)>());
  if (res.opt.k_pk) {
    res.k = TrajParam::from_vectors(ic.k_v, ic.k_a, *res.opt.k_pk);
    res.slice_extents.reserve(blocks.size());
    for (const auto& b : blocks) res.slice_extents.push_back(slice_extent(b, *res.k));
  }
  return finish();
}

}  // namespace rtd
