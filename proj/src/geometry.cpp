#include "rtd/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace rtd {

Interval::Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
  if (!(lo_ <= hi_)) throw std::invalid_argument("Interval: lo > hi");
}

Box3::Box3(const Vec3& c, const Vec3& h) : center(c), half_extents(h) {
  if (!(h.array() >= 0.0).all()) throw std::invalid_argument("Box3: negative half extent");
}

Box3 Box3::from_bounds(const Vec3& lo, const Vec3& hi) {
  return Box3(0.5 * (lo + hi), 0.5 * (hi - lo));
}

Box3 Box3::cube(const Vec3& c, double side) { return Box3(c, Vec3::Constant(0.5 * side)); }

Interval Box3::axis(int i) const {
  return Interval(center[i] - half_extents[i], center[i] + half_extents[i]);
}

bool Box3::contains(const Vec3& p, double tol) const {
  return ((p - center).cwiseAbs().array() <= half_extents.array() + tol).all();
}

bool Box3::intersects(const Box3& other) const {
  return ((center - other.center).cwiseAbs().array() <= (half_extents + other.half_extents).array())
      .all();
}

double Box3::distance_to(const Vec3& p) const {
  Vec3 d = ((p - center).cwiseAbs() - half_extents).cwiseMax(0.0);
  return d.norm();
}

namespace {

const char* quantity_prefix(Quantity q) {
  switch (q) {
    case Quantity::kPosition: return "x";
    case Quantity::kInitialVelocity: return "kv";
    case Quantity::kInitialAcceleration: return "ka";
    case Quantity::kPeakVelocity: return "kpk";
  }
  return "?";
}

}  // namespace

std::string DimLabel::str() const { return quantity_prefix(quantity) + std::to_string(axis + 1); }

DimLabel DimLabel::parse(const std::string& s) {
  for (Quantity q : {Quantity::kPosition, Quantity::kInitialVelocity,
                     Quantity::kInitialAcceleration, Quantity::kPeakVelocity}) {
    const std::string prefix = quantity_prefix(q);
    if (s.size() == prefix.size() + 1 && s.compare(0, prefix.size(), prefix) == 0) {
      const int axis = s.back() - '1';
      if (axis >= 0 && axis < 3) return {q, axis};
    }
  }
  throw std::invalid_argument("unknown zonotope row label '" + s + "'");
}

Zonotope::Zonotope(Eigen::VectorXd center, Eigen::MatrixXd generators,
                   std::vector<DimLabel> labels)
    : center_(std::move(center)), generators_(std::move(generators)), labels_(std::move(labels)) {
  if (generators_.rows() != center_.size() && generators_.cols() > 0)
    throw std::invalid_argument("Zonotope: generator row count does not match center");
  if (generators_.cols() == 0) generators_.resize(center_.size(), 0);
  if (static_cast<Eigen::Index>(labels_.size()) != center_.size())
    throw std::invalid_argument("Zonotope: label count does not match dimension");
}

int Zonotope::row_of(DimLabel label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return static_cast<int>(i);
  throw std::out_of_range("Zonotope: no row labeled " + label.str());
}

Eigen::VectorXd Zonotope::point(const Eigen::VectorXd& beta) const {
  if (beta.size() != generators_.cols())
    throw std::invalid_argument("Zonotope::point: coefficient count mismatch");
  return center_ + generators_ * beta;
}

bool Zonotope::operator==(const Zonotope& other) const {
  return labels_ == other.labels_ && center_.size() == other.center_.size() &&
         generators_.rows() == other.generators_.rows() &&
         generators_.cols() == other.generators_.cols() && center_ == other.center_ &&
         generators_ == other.generators_;
}

Zonotope box_to_zonotope(const Box3& b) {
  return Zonotope(b.center, b.half_extents.asDiagonal().toDenseMatrix(),
                  {{Quantity::kPosition, 0}, {Quantity::kPosition, 1}, {Quantity::kPosition, 2}});
}

Zonotope add_box(const Zonotope& z, const Box3& b, std::array<int, 3> rows) {
  for (int k = 0; k < 3; ++k) {
    if (rows[k] < 0 || rows[k] >= z.dim()) throw std::out_of_range("add_box: row out of range");
    for (int m = 0; m < k; ++m)
      if (rows[m] == rows[k]) throw std::invalid_argument("add_box: duplicate row");
  }
  Eigen::VectorXd c = z.center();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(z.dim(), z.num_generators() + 3);
  g.leftCols(z.num_generators()) = z.generators();
  for (int k = 0; k < 3; ++k) {
    c[rows[k]] += b.center[k];
    g(rows[k], z.num_generators() + k) = b.half_extents[k];
  }
  return Zonotope(std::move(c), std::move(g), z.labels());
}

Zonotope block_concat(const Zonotope& z1, const Zonotope& z2, const Zonotope& z3) {
  const std::array<const Zonotope*, 3> parts{&z1, &z2, &z3};
  const int p = z1.num_generators();
  if (z2.num_generators() != p || z3.num_generators() != p)
    throw std::invalid_argument("block_concat: generator counts differ");
  const int n = z1.dim() + z2.dim() + z3.dim();
  Eigen::VectorXd c(n);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, 3 * p);
  std::vector<DimLabel> labels;
  labels.reserve(n);
  int row = 0;
  for (int i = 0; i < 3; ++i) {
    const Zonotope& z = *parts[i];
    c.segment(row, z.dim()) = z.center();
    g.block(row, i * p, z.dim(), p) = z.generators();
    for (const DimLabel& l : z.labels()) labels.push_back({l.quantity, i});
    row += z.dim();
  }
  return Zonotope(std::move(c), std::move(g), std::move(labels));
}

Interval project_interval(const Zonotope& z, int row) {
  if (row < 0 || row >= z.dim()) throw std::out_of_range("project_interval: row out of range");
  const double r = z.generators().row(row).cwiseAbs().sum();
  return Interval(z.center()[row] - r, z.center()[row] + r);
}

Box3 aabb_of_points(std::span<const Vec3> pts) {
  if (pts.empty()) throw std::invalid_argument("aabb_of_points: empty point list");
  Vec3 lo = pts.front(), hi = pts.front();
  for (const Vec3& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return Box3::from_bounds(lo, hi);
}

void to_json(nlohmann::json& j, const Zonotope& z) {
  std::vector<std::vector<double>> gens(z.dim(), std::vector<double>(z.num_generators()));
  for (int r = 0; r < z.dim(); ++r)
    for (int c = 0; c < z.num_generators(); ++c) gens[r][c] = z.generators()(r, c);
  std::vector<std::string> labels;
  for (const DimLabel& l : z.labels()) labels.push_back(l.str());
  j = nlohmann::json{{"center", std::vector<double>(z.center().data(), z.center().data() + z.dim())},
                     {"generators", gens},
                     {"labels", labels}};
}

void from_json(const nlohmann::json& j, Zonotope& z) {
  const auto center = j.at("center").get<std::vector<double>>();
  const auto gens = j.at("generators").get<std::vector<std::vector<double>>>();
  const auto labels = j.at("labels").get<std::vector<std::string>>();
  if (gens.size() != center.size()) throw std::invalid_argument("zonotope json: row mismatch");
  const std::size_t p = gens.empty() ? 0 : gens.front().size();
  Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(center.data(), center.size());
  Eigen::MatrixXd g(center.size(), p);
  for (std::size_t r = 0; r < gens.size(); ++r) {
    if (gens[r].size() != p) throw std::invalid_argument("zonotope json: ragged generators");
    for (std::size_t k = 0; k < p; ++k) g(r, k) = gens[r][k];
  }
  std::vector<DimLabel> ls;
  for (const auto& s : labels) ls.push_back(DimLabel::parse(s));
  z = Zonotope(std::move(c), std::move(g), std::move(ls));
}

}  // namespace rtd
