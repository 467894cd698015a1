#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rtd/controller.hpp"
#include "rtd/geometry.hpp"
#include "rtd/quad_sim.hpp"
#include "rtd/traj_model.hpp"

namespace rtd {

/// Resolution of the (time x initial velocity) cover.
struct CoverSpec {
  double v_max = 5.0;
  double dv = 0.7;
  double dt = 0.02;
  double t_fin = 3.0;

  void validate() const;
};

/// One element D = T x K_v of the cover.
struct Subdomain {
  Interval t_interval;
  Box3 v_box;
};

/// Time bins of width dt over [0, t_fin] times a grid of velocity cubes of side
/// dv. The grid has ceil(2 v_max / dv) cells per axis, centered on the origin;
/// cells whose nearest point to the origin is farther than v_max are dropped.
class Cover {
 public:
  explicit Cover(const CoverSpec& spec);

  const CoverSpec& spec() const { return spec_; }
  int num_bins() const { return num_bins_; }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  std::size_t size() const { return static_cast<std::size_t>(num_bins_) * cells_.size(); }
  int side() const { return side_; }

  Interval bin(int j) const;
  /// Bin containing t (the later bin on a shared boundary). Throws std::out_of_range.
  int bin_of(double t) const;
  const std::array<int, 3>& cell_coords(int cell) const { return cells_[cell]; }
  Box3 cell_box(int cell) const;
  /// Retained cell containing k_v, or -1 when it lies outside the retained cover.
  int cell_of(const Vec3& k_v) const;
  /// cell_of, falling back to the retained cell whose center is nearest.
  int nearest_cell(const Vec3& k_v) const;
  /// Lattice coordinate of a grid vertex along one axis.
  double vertex_coord(int index) const { return grid_lo_ + index * spec_.dv; }

  std::vector<Subdomain> subdomains() const;

 private:
  std::array<int, 3> grid_coords(const Vec3& k_v) const;
  int flat(const std::array<int, 3>& c) const { return (c[0] * side_ + c[1]) * side_ + c[2]; }

  CoverSpec spec_;
  int num_bins_ = 0;
  int side_ = 0;
  double grid_lo_ = 0.0;
  std::vector<std::array<int, 3>> cells_;
  std::vector<int> dense_;    // grid cell -> retained index or -1
  std::vector<int> nearest_;  // grid cell -> nearest retained index
};

Cover build_cover(const CoverSpec& spec);

/// The eight peak-velocity samples k_pk = b * sigma + k_v, sigma in {-1, 1}^3,
/// each with the largest b >= 0 satisfying both the acceleration and speed limits.
std::array<Vec3, 8> feasible_peak_vels(const Vec3& k_v, double t_pk, double a_max, double v_max);

/// Axis-aligned bound on tracking error, possibly asymmetric about zero.
struct ErrorBox {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  static ErrorBox symmetric(double half_width);
  bool empty() const { return !(lo.array() <= hi.array()).all(); }
  void include(const Vec3& e);
  void unite(const ErrorBox& other);
  void inflate(double amount);
  bool contains(const Vec3& e, double tol = 0.0) const;
  Box3 box() const { return Box3::from_bounds(lo, hi); }
  /// Largest |coordinate| reached by the box.
  double max_abs() const { return std::max(lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff()); }
};

struct TableMetadata {
  std::uint64_t config_hash = 0;
  double dt_sim = 0.005;
  double slack = 0.002;
  double a_max = 3.0;
  std::size_t num_simulations = 0;
  std::size_t num_samples = 0;
  double max_raw_error = 0.0;  // max |e_x| over all samples, before slack
  double build_seconds = 0.0;
};

/// Lookup from (time bin, velocity cell) to ErrorBox.
class TrackingErrorTable {
 public:
  static constexpr std::uint32_t kVersion = 1;

  TrackingErrorTable(const CoverSpec& spec, TrajTiming timing, std::vector<ErrorBox> boxes,
                     TableMetadata meta);

  const Cover& cover() const { return cover_; }
  const TrajTiming& timing() const { return timing_; }
  const TableMetadata& metadata() const { return meta_; }
  const ErrorBox& at(int bin, int cell) const { return boxes_[index(bin, cell)]; }

  /// Box of the cell containing (t, k_v); nearest retained cell when k_v is
  /// outside the ball cover. Throws std::out_of_range for t outside [0, t_fin].
  ErrorBox query(double t, const Vec3& k_v) const;
  /// Union of the boxes of every bin overlapping `t`.
  ErrorBox query_interval(const Interval& t, const Vec3& k_v) const;

  /// Largest |e| reached by any stored box.
  double max_abs_error() const;

  void save(const std::string& path) const;
  static TrackingErrorTable load(const std::string& path);

  bool operator==(const TrackingErrorTable& other) const;

 private:
  std::size_t index(int bin, int cell) const {
    return static_cast<std::size_t>(bin) * cover_.num_cells() + cell;
  }

  Cover cover_;
  TrajTiming timing_;
  std::vector<ErrorBox> boxes_;
  TableMetadata meta_;
};

/// Closed-loop tracking of one sampled reference from (0, k_v, 0, I) with k_a = 0.
struct SampleTrace {
  Vec3 k_v;
  Vec3 k_pk;
  std::vector<double> t;
  std::vector<Vec3> e_x;
};

SampleTrace trace_sample(const Vec3& k_v, const Vec3& k_pk, const QuadParams& params,
                         const Gains& gains, const TrajTiming& timing, double dt_sim);

struct TableBuildOptions {
  double dt_sim = 0.005;
  double slack = 0.002;
  double a_max = 3.0;
  std::uint64_t config_hash = 0;
  unsigned threads = 0;
};

/// Samples every vertex of every retained velocity cell with its eight feasible
/// peak velocities and stores, per (bin, cell), the bounding box of all
/// tracking errors observed in that bin, padded by `slack`. Shared vertices
/// are simulated once. Throws std::runtime_error if any simulation diverges.
TrackingErrorTable compute_table(const Cover& cover, const QuadParams& params, const Gains& gains,
                                 const TrajTiming& timing, const TableBuildOptions& options);

/// Double integrator with linear feedback on a traj_model reference, swept over
/// a grid of initial speeds that includes both interval endpoints.
struct EndpointArgmaxReport {
  int num_times = 0;
  int num_violations = 0;           // times where an interior speed beat both endpoints
  double max_linearity_residual = 0.0;  // deviation of |e| / |dv0| from a per-time constant
  double max_error_at_matched_speed = 0.0;
  bool holds() const { return num_violations == 0; }
};

EndpointArgmaxReport endpoint_argmax_experiment(double kp, double kd, const Interval& initial_speeds,
                             const TrajParam1D& reference, const TrajTiming& timing,
                             int grid_points = 21, double dt = 1e-3);

}  // namespace rtd
