#include "rtd/frs.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "rtd/artifact.hpp"
#include "rtd/parallel.hpp"

namespace rtd {

namespace {

constexpr int kSamplesPerStep = 32;
constexpr double kEpsPad = 1e-9;

std::vector<DimLabel> block_labels() {
  return {{Quantity::kPosition, 0},
          {Quantity::kInitialVelocity, 0},
          {Quantity::kInitialAcceleration, 0},
          {Quantity::kPeakVelocity, 0}};
}

double coeff(const AffineCoeffs& c, int which) { return which == 0 ? c.v : which == 1 ? c.a : c.pk; }

// Largest |a'(t)| over the step for one coefficient; a'' is quadratic on the step.
double max_abs_slope(const Interval& step, const TrajTiming& timing, int which) {
  const double lo = step.lo, hi = step.hi, h = hi - lo;
  const double q0 = coeff(affine_acc_coeffs(lo, timing), which);
  const double q1 = coeff(affine_acc_coeffs(lo + 0.5 * h, timing), which);
  const double q2 = coeff(affine_acc_coeffs(hi, timing), which);
  // q(s) = q0 + beta s + gamma s^2 on s in [0, h]
  const double gamma = 2.0 * (q0 - 2.0 * q1 + q2) / (h * h);
  const double beta = (q2 - q0) / h - gamma * h;
  std::vector<double> candidates{lo, hi};
  if (std::abs(gamma) > 1e-300) {
    const double disc = beta * beta - 4.0 * gamma * q0;
    if (disc >= 0.0) {
      const double r = std::sqrt(disc);
      for (double s : {(-beta - r) / (2.0 * gamma), (-beta + r) / (2.0 * gamma)})
        if (s > 0.0 && s < h) candidates.push_back(lo + s);
    }
  } else if (std::abs(beta) > 1e-300) {
    const double s = -q0 / beta;
    if (s > 0.0 && s < h) candidates.push_back(lo + s);
  }
  double m = 0.0;
  for (double t : candidates) m = std::max(m, std::abs(coeff(affine_vel_coeffs(t, timing), which)));
  return m;
}

}  // namespace

int TimedFRS::step_of(double t) const {
  if (steps.empty() || t < steps.front().t_interval.lo - 1e-9 || t > steps.back().t_interval.hi + 1e-9)
    throw std::out_of_range("time " + std::to_string(t) + " outside the FRS horizon");
  int lo = 0, hi = static_cast<int>(steps.size()) - 1;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    if (t <= steps[mid].t_interval.hi)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

bool TimedFRS::operator==(const TimedFRS& other) const {
  if (!(timing == other.timing) || !(bounds == other.bounds) || dt != other.dt ||
      config_hash != other.config_hash || steps.size() != other.steps.size())
    return false;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto &a = steps[i], &b = other.steps[i];
    if (a.t_interval.lo != b.t_interval.lo || a.t_interval.hi != b.t_interval.hi || !(a.zono == b.zono))
      return false;
  }
  return true;
}

Zonotope initial_set_1d(const ParamBounds& bounds) {
  bounds.validate();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(4, 4);
  G(1, kColV) = bounds.v;
  G(2, kColA) = bounds.a;
  G(3, kColPk) = bounds.pk;
  return Zonotope(Eigen::VectorXd::Zero(4), G, block_labels());
}

std::vector<Interval> frs_step_grid(const TrajTiming& timing, double dt) {
  timing.validate();
  if (!(dt > 0)) throw std::invalid_argument("FRS time step must be positive");
  std::vector<Interval> grid;
  auto split = [&](double a, double b) {
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / dt - 1e-9)));
    for (int i = 0; i < n; ++i)
      grid.emplace_back(a + (b - a) * i / n, i + 1 == n ? b : a + (b - a) * (i + 1) / n);
  };
  split(0.0, timing.t_pk);
  split(timing.t_pk, timing.t_fin);
  return grid;
}

AffineCoeffs remainder_bounds(const Interval& step, const TrajTiming& timing) {
  const double tc = step.center();
  const double h = step.width() / kSamplesPerStep;
  const AffineCoeffs at_c = affine_pos_coeffs(tc, timing);
  AffineCoeffs r;
  for (int i = 0; i <= kSamplesPerStep; ++i) {
    const double t = i == kSamplesPerStep ? step.hi : step.lo + i * h;
    const AffineCoeffs a = affine_pos_coeffs(t, timing);
    r.v = std::max(r.v, std::abs(a.v - at_c.v));
    r.a = std::max(r.a, std::abs(a.a - at_c.a));
    r.pk = std::max(r.pk, std::abs(a.pk - at_c.pk));
  }
  // Every t in the step is within h/2 of a sample.
  r.v += 0.5 * h * max_abs_slope(step, timing, 0);
  r.a += 0.5 * h * max_abs_slope(step, timing, 1);
  r.pk += 0.5 * h * max_abs_slope(step, timing, 2);
  return r;
}

namespace {

Zonotope step_zonotope_1d(const Interval& step, const ParamBounds& bounds, const TrajTiming& timing) {
  const AffineCoeffs a = affine_pos_coeffs(step.center(), timing);
  const AffineCoeffs r = remainder_bounds(step, timing);
  Eigen::MatrixXd G = initial_set_1d(bounds).generators();
  G(0, kColV) = a.v * bounds.v;
  G(0, kColA) = a.a * bounds.a;
  G(0, kColPk) = a.pk * bounds.pk;
  G(0, kColEps) = r.v * bounds.v + r.a * bounds.a + r.pk * bounds.pk + kEpsPad;
  return Zonotope(Eigen::VectorXd::Zero(4), G, block_labels());
}

}  // namespace

std::vector<TimedZonotope> reach_1d(const ParamBounds& bounds, const TrajTiming& timing, double dt) {
  bounds.validate();
  std::vector<TimedZonotope> out;
  for (const Interval& step : frs_step_grid(timing, dt))
    out.push_back({step, step_zonotope_1d(step, bounds, timing)});
  return out;
}

TimedFRS reach_3d(const ParamBounds& bounds, const TrajTiming& timing, double dt,
                  std::uint64_t config_hash, unsigned threads) {
  bounds.validate();
  const auto grid = frs_step_grid(timing, dt);
  TimedFRS frs;
  frs.timing = timing;
  frs.bounds = bounds;
  frs.dt = dt;
  frs.config_hash = config_hash;
  frs.steps.resize(grid.size());
  parallel_for(
      grid.size(),
      [&](std::size_t i) {
        const Zonotope z = step_zonotope_1d(grid[i], bounds, timing);
        frs.steps[i] = {grid[i], block_concat(z, z, z)};
      },
      threads);
  return frs;
}

BlockCoeffs extract_block(const Zonotope& z, int axis) {
  const int rx = z.row_of(Quantity::kPosition, axis);
  const int rv = z.row_of(Quantity::kInitialVelocity, axis);
  const int ra = z.row_of(Quantity::kInitialAcceleration, axis);
  const int rpk = z.row_of(Quantity::kPeakVelocity, axis);
  const auto& G = z.generators();
  const auto& c = z.center();

  BlockCoeffs b;
  b.c_x = c(rx);
  b.c_v = c(rv);
  b.c_a = c(ra);
  b.c_pk = c(rpk);
  int col_v = -1, col_a = -1, col_pk = -1;
  const auto& labels = z.labels();
  for (int j = 0; j < G.cols(); ++j) {
    const bool on_v = G(rv, j) != 0.0, on_a = G(ra, j) != 0.0, on_pk = G(rpk, j) != 0.0;
    bool other_param = false;
    for (int r = 0; r < G.rows(); ++r)
      if (r != rv && r != ra && r != rpk && labels[r].quantity != Quantity::kPosition && G(r, j) != 0.0)
        other_param = true;
    const int own = on_v + on_a + on_pk;
    if (own == 0 && !other_param) {
      // k-independent: only widens position rows
      b.eps += std::abs(G(rx, j));
      continue;
    }
    if (own == 0) {
      if (G(rx, j) != 0.0)
        throw std::invalid_argument("extract_block: position row depends on another axis' parameters");
      continue;
    }
    if (own > 1 || other_param)
      throw std::invalid_argument("extract_block: a generator couples several parameters");
    int& slot = on_v ? col_v : on_a ? col_a : col_pk;
    if (slot >= 0) throw std::invalid_argument("extract_block: parameter row has several generators");
    slot = j;
  }
  if (col_v < 0 || col_a < 0 || col_pk < 0)
    throw std::invalid_argument("extract_block: missing parameter generator on axis " +
                                std::to_string(axis));
  b.g_xv = G(rx, col_v);
  b.g_xa = G(rx, col_a);
  b.g_xpk = G(rx, col_pk);
  b.g_v = G(rv, col_v);
  b.g_a = G(ra, col_a);
  b.g_pk = G(rpk, col_pk);
  return b;
}

bool block_contains(const BlockCoeffs& b, double x, const TrajParam1D& kappa, double tol) {
  const double bv = (kappa.kappa_v - b.c_v) / b.g_v;
  const double ba = (kappa.kappa_a - b.c_a) / b.g_a;
  const double bpk = (kappa.kappa_pk - b.c_pk) / b.g_pk;
  if (std::abs(bv) > 1 + tol || std::abs(ba) > 1 + tol || std::abs(bpk) > 1 + tol) return false;
  const double residual = x - (b.c_x + b.g_xv * bv + b.g_xa * ba + b.g_xpk * bpk);
  return std::abs(residual) <= b.eps + tol;
}

bool frs_contains(const Zonotope& z, const Vec3& pos, const TrajParam& k, double tol) {
  for (int i = 0; i < 3; ++i)
    if (!block_contains(extract_block(z, i), pos[i], k.axes[i], tol)) return false;
  return true;
}

void save_frs(const TimedFRS& frs, const std::string& path) {
  nlohmann::json steps = nlohmann::json::array();
  for (const TimedZonotope& s : frs.steps)
    steps.push_back({{"t", {s.t_interval.lo, s.t_interval.hi}}, {"zonotope", s.zono}});
  const nlohmann::json j{{"format", "rtd-frs"},
                         {"version", TimedFRS::kVersion},
                         {"config_hash", hash_to_hex(frs.config_hash)},
                         {"timing", {{"t_plan", frs.timing.t_plan}, {"t_pk", frs.timing.t_pk}, {"t_fin", frs.timing.t_fin}}},
                         {"bounds", {{"v", frs.bounds.v}, {"a", frs.bounds.a}, {"pk", frs.bounds.pk}}},
                         {"dt", frs.dt},
                         {"steps", steps}};
  std::ofstream os(path);
  if (!os) throw ArtifactError("cannot write FRS '" + path + "'");
  os << j.dump() << '\n';
  if (!os) throw ArtifactError("failed writing FRS '" + path + "'");
}

TimedFRS load_frs(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ArtifactError("FRS file '" + path + "' not found");
  TimedFRS frs;
  try {
    const auto j = nlohmann::json::parse(is);
    if (j.at("format").get<std::string>() != "rtd-frs")
      throw ArtifactError("'" + path + "' is not an FRS file");
    const int version = j.at("version").get<int>();
    if (version != TimedFRS::kVersion)
      throw ArtifactError("FRS '" + path + "' has version " + std::to_string(version) +
                          ", expected " + std::to_string(TimedFRS::kVersion));
    frs.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    const auto& t = j.at("timing");
    frs.timing = {t.at("t_plan").get<double>(), t.at("t_pk").get<double>(), t.at("t_fin").get<double>()};
    const auto& b = j.at("bounds");
    frs.bounds = {b.at("v").get<double>(), b.at("a").get<double>(), b.at("pk").get<double>()};
    frs.dt = j.at("dt").get<double>();
    for (const auto& s : j.at("steps")) {
      const auto& ti = s.at("t");
      frs.steps.push_back({Interval(ti.at(0).get<double>(), ti.at(1).get<double>()),
                           s.at("zonotope").get<Zonotope>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("FRS '" + path + "' is corrupt: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ArtifactError("FRS '" + path + "' is corrupt: " + e.what());
  }
  if (frs.steps.empty()) throw ArtifactError("FRS '" + path + "' has no steps");
  return frs;
}

void check_frs_compatible(const TimedFRS& frs, const TrajTiming& timing, const ParamBounds& bounds) {
  if (!(frs.timing == timing))
    throw ArtifactError("FRS was built for timing (" + std::to_string(frs.timing.t_plan) + ", " +
                        std::to_string(frs.timing.t_pk) + ", " + std::to_string(frs.timing.t_fin) +
                        ") which differs from the planner's");
  if (!(frs.bounds == bounds)) throw ArtifactError("FRS was built for different parameter bounds");
}

}  // namespace rtd
