#pragma once

#include <cstdint>
#include <string>

#include "rtd/controller.hpp"
#include "rtd/planner.hpp"
#include "rtd/quad_sim.hpp"
#include "rtd/tracking_error.hpp"
#include "rtd/traj_model.hpp"
#include "rtd/world_bench.hpp"

namespace rtd {

/// Every tunable of the pipeline. Defaults are the Hummingbird values.
struct Config {
  QuadParams quad;
  double gx = 2.0, gv = 0.5, gr = 1.0, gw = 0.03;
  TrajTiming timing;
  ParamBounds bounds;
  double v_max = 5.0;
  double a_max = 3.0;
  double d_sense = 12.0;
  double body_width = 0.54;

  // offline resolutions
  double err_dv = 0.7;
  double err_dt = 0.02;
  double err_slack = 0.002;
  double dt_sim = 0.005;
  double frs_dt = 0.02;

  // planner and benchmark policy
  double waypoint_distance = 5.0;
  int num_samples = 10000;
  bool horizon_check = true;
  double wall_thickness = 1.0;
  double constant_error = 0.1;
  double goal_radius = 1.5;
  double max_time = 120.0;
  int stop_iterations = 3;
  double rest_speed = 0.05;
  double stuck_time = 20.0;
  double stuck_progress = 0.5;
  WorldSpec world;

  // execution
  bool deterministic = true;
  double plan_budget = 0.75;  // wall-clock seconds, ignored when deterministic
  int threads = 0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;

  Gains gains() const;
  Box3 body() const;
  CoverSpec cover_spec() const;
  TableBuildOptions table_options() const;
  PlannerConfig planner() const;
  TrialConfig trial() const;

  /// Hash of the fields that determine the FRS.
  std::uint64_t frs_hash() const;
  /// Hash of the fields that determine the error table.
  std::uint64_t table_hash() const;
};

/// Distance covered while braking from v_max to rest along the fail-safe segment.
double stopping_distance(const TrajTiming& timing, double v_max);

/// `key = value` lines, `#` comments. Throws std::invalid_argument on unknown
/// keys, malformed values or failed validation.
Config parse_config(const std::string& text);
Config load_config(const std::string& path);
std::string dump_config(const Config& c);

}  // namespace rtd
