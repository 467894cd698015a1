#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace rtd {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Closed scalar interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  Interval() = default;
  Interval(double lo_, double hi_);

  double width() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
  bool overlaps(const Interval& other) const { return lo <= other.hi && other.lo <= hi; }
};

/// Axis-aligned closed box given by center and non-negative half extents.
struct Box3 {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Zero();

  Box3() = default;
  Box3(const Vec3& c, const Vec3& h);

  static Box3 from_bounds(const Vec3& lo, const Vec3& hi);
  /// Cube of side length `side` centered at `c`.
  static Box3 cube(const Vec3& c, double side);

  Vec3 lo() const { return center - half_extents; }
  Vec3 hi() const { return center + half_extents; }
  Interval axis(int i) const;
  bool contains(const Vec3& p, double tol = 0.0) const;
  bool intersects(const Box3& other) const;
  Box3 translated(const Vec3& offset) const { return {center + offset, half_extents}; }
  /// Euclidean distance from `p` to the nearest point of the box (0 inside).
  double distance_to(const Vec3& p) const;
};

/// Semantic meaning of a zonotope row.
enum class Quantity { kPosition, kPeakVelocity, kInitialVelocity, kInitialAcceleration };

struct DimLabel {
  Quantity quantity = Quantity::kPosition;
  int axis = 0;

  bool operator==(const DimLabel&) const = default;
  std::string str() const;
  static DimLabel parse(const std::string& s);
};

/// The set {c + G beta : beta in [-1, 1]^p} with labeled rows.
class Zonotope {
 public:
  Zonotope() = default;
  Zonotope(Eigen::VectorXd center, Eigen::MatrixXd generators, std::vector<DimLabel> labels);

  const Eigen::VectorXd& center() const { return center_; }
  const Eigen::MatrixXd& generators() const { return generators_; }
  const std::vector<DimLabel>& labels() const { return labels_; }
  int dim() const { return static_cast<int>(center_.size()); }
  int num_generators() const { return static_cast<int>(generators_.cols()); }

  /// Row index carrying `label`; throws std::out_of_range when absent.
  int row_of(DimLabel label) const;
  int row_of(Quantity q, int axis) const { return row_of(DimLabel{q, axis}); }

  /// c + G beta.
  Eigen::VectorXd point(const Eigen::VectorXd& beta) const;

  bool operator==(const Zonotope& other) const;

 private:
  Eigen::VectorXd center_;
  Eigen::MatrixXd generators_;
  std::vector<DimLabel> labels_;
};

Zonotope box_to_zonotope(const Box3& b);

/// Minkowski sum with a box living in the three given rows.
Zonotope add_box(const Zonotope& z, const Box3& b, std::array<int, 3> rows);

/// Block-diagonal concatenation of three zonotopes with equal generator counts.
/// Labels of block i are re-tagged with axis i.
Zonotope block_concat(const Zonotope& z1, const Zonotope& z2, const Zonotope& z3);

/// Exact interval hull of a single row.
Interval project_interval(const Zonotope& z, int row);

Box3 aabb_of_points(std::span<const Vec3> pts);

void to_json(nlohmann::json& j, const Zonotope& z);
void from_json(const nlohmann::json& j, Zonotope& z);

}  // namespace rtd
