#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtd/geometry.hpp"
#include "rtd/traj_model.hpp"

namespace rtd {

/// A zonotope valid over one closed time step.
struct TimedZonotope {
  Interval t_interval;
  Zonotope zono;
};

/// Forward reachable set of the trajectory model as time-ordered steps
/// partitioning [0, t_fin]. Rows per axis block: x, kv, ka, kpk.
struct TimedFRS {
  static constexpr int kVersion = 1;

  std::vector<TimedZonotope> steps;
  TrajTiming timing;
  ParamBounds bounds;
  double dt = 0.02;
  std::uint64_t config_hash = 0;

  /// Index of the step containing t (the earlier one on a shared boundary).
  /// Throws std::out_of_range outside [0, t_fin].
  int step_of(double t) const;

  bool operator==(const TimedFRS& other) const;
};

/// Column layout of every 4-row block: kappa_v, kappa_a, kappa_pk, remainder.
enum FrsColumn { kColV = 0, kColA = 1, kColPk = 2, kColEps = 3 };

/// diag(0, v, a, pk) around the origin.
Zonotope initial_set_1d(const ParamBounds& bounds);

/// Breakpoints of the step grid: [0, t_pk] and [t_pk, t_fin] are split
/// separately into steps no longer than dt.
std::vector<Interval> frs_step_grid(const TrajTiming& timing, double dt);

/// Bound on |a(t) - a(t_c)| over the step for each coefficient of
/// affine_pos_coeffs, returned as (v, a, pk).
AffineCoeffs remainder_bounds(const Interval& step, const TrajTiming& timing);

std::vector<TimedZonotope> reach_1d(const ParamBounds& bounds, const TrajTiming& timing, double dt);

TimedFRS reach_3d(const ParamBounds& bounds, const TrajTiming& timing, double dt,
                  std::uint64_t config_hash = 0, unsigned threads = 0);

/// The per-axis quantities of a zonotope with the structured block form:
/// position row x = c_x + g_xv b_v + g_xa b_a + g_xpk b_pk + eps b_eps and
/// parameter rows kappa_* = c_* + g_* b_*.
struct BlockCoeffs {
  double c_x = 0, c_v = 0, c_a = 0, c_pk = 0;
  double g_xv = 0, g_xa = 0, g_xpk = 0;
  double g_v = 0, g_a = 0, g_pk = 0;
  double eps = 0;
};

/// Reads axis `axis` of z. Columns that touch only the position row are summed
/// (in absolute value) into eps. Throws std::invalid_argument when a parameter
/// row has other than one generator or a column couples two parameters.
BlockCoeffs extract_block(const Zonotope& z, int axis);

/// Exact membership of (x, kappa) in one axis block.
bool block_contains(const BlockCoeffs& b, double x, const TrajParam1D& kappa, double tol = 1e-12);

/// Exact membership of (pos, k) in a 3-block FRS zonotope.
bool frs_contains(const Zonotope& z, const Vec3& pos, const TrajParam& k, double tol = 1e-12);

void save_frs(const TimedFRS& frs, const std::string& path);
/// Throws ArtifactError on a missing, corrupt or version-mismatched file.
TimedFRS load_frs(const std::string& path);
/// Throws ArtifactError unless the FRS was built for exactly this timing and
/// parameter box.
void check_frs_compatible(const TimedFRS& frs, const TrajTiming& timing, const ParamBounds& bounds);

}  // namespace rtd
