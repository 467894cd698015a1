#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "rtd/controller.hpp"
#include "rtd/frs.hpp"
#include "rtd/geometry.hpp"
#include "rtd/quad_sim.hpp"
#include "rtd/tracking_error.hpp"
#include "rtd/traj_model.hpp"

namespace rtd {

using Obstacle = Box3;

/// Obstacles whose nearest point lies within d_sense of `sensor` (inclusive),
/// plus six slabs of thickness `wall` enclosing `bounds`, all shifted by
/// -frame_origin.
std::vector<Obstacle> sense_obstacles(const Vec3& sensor, const Vec3& frame_origin,
                                      const std::vector<Obstacle>& world_obstacles,
                                      const Box3& bounds, double d_sense, double wall = 1.0);

/// The six slabs of thickness `wall` bordering `bounds` from outside.
std::vector<Obstacle> boundary_slabs(const Box3& bounds, double wall = 1.0);

/// An executable plan: the trajectory model anchored at x0, started at t_start.
struct Plan {
  TrajParam k;
  TrajTiming timing;
  Vec3 x0 = Vec3::Zero();
  double t_start = 0.0;

  /// World-frame reference; rests at its end point after t_start + t_fin.
  RefPoint reference(double t) const;
  /// A plan that holds position x0 from t_start on.
  static Plan hover(const Vec3& x0, const TrajTiming& timing, double t_start = 0.0);
};

/// Closed-loop execution of a plan with Lie-Euler steps at absolute times
/// t0 + n dt. `on_step(t, s)` sees every new state and may return false to stop.
/// Returns the number of steps taken.
int execute_plan(QuadState& s, double t0, int steps, double dt, TrackingController& ctrl,
                 const Plan& plan, const QuadParams& p,
                 const std::function<bool(double, const QuadState&)>& on_step = {});

struct InitialCondition {
  Vec3 k_v = Vec3::Zero();
  Vec3 k_a = Vec3::Zero();
  Vec3 x0 = Vec3::Zero();
  QuadState predicted;  // full predicted state at the hand-over time
};

/// (tau / m) R e3 - g e3 for the saturated thrust tau.
Vec3 acceleration_from_thrust(const QuadState& s, double thrust, const QuadParams& p);

/// Predicts the state `steps` Lie-Euler steps ahead by running a copy of
/// `ctrl` on `prev`, then reads off k_v, k_a and x0. nullopt when the
/// prediction diverges.
std::optional<InitialCondition> initial_condition(const QuadState& s, double t, const Plan& prev,
                                                  const TrackingController& ctrl, int steps,
                                                  double dt, const QuadParams& p);

/// Tracking-error bound used to augment the FRS: a constant cube or a table.
class ErrorModel {
 public:
  static ErrorModel constant(double half_width);
  static ErrorModel table(std::shared_ptr<const TrackingErrorTable> table);

  bool is_table() const { return table_ != nullptr; }
  const TrackingErrorTable* lookup() const { return table_.get(); }
  double constant_half_width() const { return half_width_; }
  /// Bound over a time step for initial velocity k_v.
  ErrorBox bound(const Interval& step, const Vec3& k_v) const;
  /// Throws ArtifactError if a table does not span the FRS horizon.
  void check_compatible(const TimedFRS& frs) const;

 private:
  double half_width_ = 0.0;
  std::shared_ptr<const TrackingErrorTable> table_;
};

/// Block zonotope with columns (v, a, pk, eps) built from structured coefficients.
Zonotope make_block(const BlockCoeffs& b);

/// Adds the error box and body box to the position rows of every step and
/// folds every k-independent column into the per-axis remainder column.
std::vector<TimedZonotope> error_augment(const TimedFRS& frs, const ErrorModel& error,
                                         const Vec3& k_v, const Box3& body);

/// Unsafe peak-velocity box of one step against one obstacle.
struct UnsafeBox {
  Box3 box;
  int step = 0;
  int obstacle = 0;
};

/// True when (k_v, k_a) lies in the parameter slice of every block.
bool in_parameter_slice(const std::array<BlockCoeffs, 3>& blocks, const Vec3& k_v, const Vec3& k_a,
                        double tol = 1e-9);

/// Per-axis interval of kappa_pk values whose position interval meets the
/// eps-inflated obstacle; nullopt when empty. Throws std::domain_error when
/// (kappa_v, kappa_a) lies outside the block's parameter slice.
std::optional<Interval> unsafe_interval_1d(const BlockCoeffs& b, const Interval& obstacle,
                                           double kappa_v, double kappa_a);

/// Product of the per-axis unsafe intervals, or nullopt if any is empty.
std::optional<Box3> intersect_obs(const std::array<BlockCoeffs, 3>& blocks, const Obstacle& o,
                                  const Vec3& k_v, const Vec3& k_a);
std::optional<Box3> intersect_obs(const Zonotope& zeps, const Obstacle& o, const Vec3& k_v,
                                  const Vec3& k_a);

/// Stacked half-space form: block j holds A = [I; -I] and b = [h - c; h + c]
/// row-interleaved per axis, so A k + b >= 0 exactly inside box j.
struct ConstraintSet {
  Eigen::Matrix<double, Eigen::Dynamic, 3> A;
  Eigen::VectorXd b;

  int num_blocks() const { return static_cast<int>(b.size() / 6); }
  /// min over the rows of block j of A k + b.
  double block_min(int j, const Vec3& k_pk) const;
};

ConstraintSet generate_constraints(const std::vector<UnsafeBox>& unsafe);

/// Every block has min(A k + b) < 0.
bool is_safe(const Vec3& k_pk, const ConstraintSet& constraints);

/// First n points of the Halton (2, 3, 5) sequence mapped to [-1, 1]^3 that
/// fall inside the closed unit ball.
const std::vector<Vec3>& unit_ball_samples(int n);

struct Budget {
  double wall_seconds = 0.75;  // <= 0 disables the clock
  int max_batches = -1;        // < 0: unlimited
  int batch_size = 512;
};

struct OptimizeResult {
  std::optional<Vec3> k_pk;
  int num_samples = 0;
  int num_feasible = 0;
  int num_evaluated = 0;
  bool budget_exhausted = false;
};

/// Evaluates samples k_v + radius * u in increasing (cost, index) order and
/// returns the first that is feasible, safe and passes `accept` (if given).
OptimizeResult optimize(const std::function<double(const Vec3&)>& cost, const ConstraintSet& constraints,
                        const Vec3& k_v, const TrajTiming& timing, double v_max, double a_max,
                        int num_samples, const Budget& budget,
                        const std::function<bool(const Vec3&)>& accept = {});

struct PlannerConfig {
  TrajTiming timing;
  ParamBounds bounds;
  double v_max = 5.0;
  double a_max = 3.0;
  double d_sense = 12.0;
  double wall_thickness = 1.0;
  Box3 body{Vec3::Zero(), Vec3::Constant(0.27)};
  double waypoint_distance = 5.0;
  int num_samples = 10000;
  /// Reject plans whose augmented slice leaves the sensed ball; unsensed
  /// space is then never entered even when d_sense is short of the plan length.
  bool horizon_check = true;
  Budget budget;
  bool debug = false;
};

/// Waypoint `distance` from x0 toward goal, or the goal when closer.
Vec3 waypoint_toward(const Vec3& x0, const Vec3& goal, double distance);

struct PlanningProblem {
  InitialCondition ic;
  Vec3 sensor = Vec3::Zero();  // true COM at planning time
  Vec3 goal = Vec3::Zero();
  const std::vector<Obstacle>* world_obstacles = nullptr;
  Box3 world_bounds;
};

struct IterationResult {
  std::optional<TrajParam> k;
  int num_obstacles = 0;
  int num_unsafe_boxes = 0;
  OptimizeResult opt;
  bool outside_slice = false;
  double seconds = 0.0;
  /// Per-step position extents of the chosen plan's augmented FRS slice
  /// (local frame), filled when a plan is found.
  std::vector<Box3> slice_extents;
  nlohmann::json debug;
};

/// One receding-horizon iteration in the frame centered at ic.x0. An empty k
/// means the previous plan keeps running to its fail-safe stop.
IterationResult plan_iteration(const PlanningProblem& problem, const TimedFRS& frs,
                               const ErrorModel& error, const PlannerConfig& config);

/// Position interval of each axis block with (k_v, k_a, k_pk) fixed.
Box3 slice_extent(const std::array<BlockCoeffs, 3>& blocks, const TrajParam& k);

}  // namespace rtd
