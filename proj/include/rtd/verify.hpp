#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtd/config.hpp"
#include "rtd/frs.hpp"
#include "rtd/planner.hpp"
#include "rtd/tracking_error.hpp"

namespace rtd {

/// Outcome of one property check. `soft` results are reported but never fail a run.
struct CheckResult {
  std::string name;
  bool pass = false;
  bool soft = false;
  std::string detail;
  double seconds = 0.0;
};

/// Membership by solving the full generator system c + G beta = y and
/// checking ||beta||_inf <= 1. Needs a square invertible G.
bool zonotope_contains_by_solve(const Zonotope& z, const Eigen::VectorXd& y, double tol = 1e-9);

/// Random (t, k) in the parameter box; the model position must lie in every
/// step covering t.
CheckResult check_frs_conservatism(const TimedFRS& frs, int samples, std::uint64_t seed);

struct UnsafeBoxStats {
  int instances = 0;
  int nonempty = 0;
  int grid_points = 0;
  int missed = 0;        // grid point labelled unsafe but outside the closed-form box
  int uncovered = 0;     // box interior point (one cell in) labelled safe
  int outward_clamp_disagreements = 0;
};

/// Closed-form unsafe boxes against a brute-force k_pk grid on random
/// augmented zonotopes and obstacles.
CheckResult check_unsafe_boxes(const TimedFRS& frs, int instances, double resolution, std::uint64_t seed,
                           UnsafeBoxStats* stats = nullptr);

/// is_safe against direct box membership of random points.
CheckResult check_constraints(int instances, int points, std::uint64_t seed);

/// Analytic terminal rest and closed-loop speed at t_fin for random feasible k.
CheckResult check_fail_safe(const Config& cfg, int samples, std::uint64_t seed);

/// Lie-Euler against RK-MK4 final positions on random tracked trajectories
/// (the mid-flight maximum is reported too).
CheckResult check_integrators(const Config& cfg, int samples, double tol, std::uint64_t seed);

/// Double-integrator endpoint-argmax on random gains and trajectories.
CheckResult check_endpoint_argmax(const Config& cfg, int instances, std::uint64_t seed);

/// Re-simulates every sample the table was built from; all errors must be
/// within `bound` (inf-norm) and inside the box of every cell and bin the
/// sample belongs to.
CheckResult check_table_replay(const TrackingErrorTable& table, const Config& cfg, double bound);

/// Cover size at dv = 0.7 m/s, dt = 0.02 s against the reference count 102,900.
CheckResult check_cover_cardinality();

}  // namespace rtd
