#include "rtd/verify.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace rtd {

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(gen_() >> 11) * 0x1.0p-53);
  }
  Vec3 in_ball(double r) {
    for (;;) {
      const Vec3 u(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
      if (u.squaredNorm() <= 1.0) return r * u;
    }
  }
  int index(int n) { return std::min(n - 1, static_cast<int>(uniform(0, n))); }

 private:
  std::mt19937_64 gen_;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

CheckResult finish(std::string name, bool pass, const std::ostringstream& detail, const Timer& timer,
                   bool soft = false) {
  return {std::move(name), pass, soft, detail.str(), timer.seconds()};
}

// Feasible (k_v, k_pk) with a random k_a of norm <= a_k.
TrajParam random_feasible(Rng& rng, const Config& cfg, double a_k) {
  const Vec3 k_v = rng.in_ball(cfg.v_max);
  Vec3 k_pk;
  do {
    k_pk = k_v + rng.in_ball(cfg.a_max * cfg.timing.t_pk);
  } while (k_pk.norm() > cfg.v_max);
  return TrajParam::from_vectors(k_v, rng.in_ball(a_k), k_pk);
}

Eigen::VectorXd frs_point(const Zonotope& z, const Vec3& pos, const TrajParam& k) {
  Eigen::VectorXd y(z.dim());
  for (int r = 0; r < z.dim(); ++r) {
    const DimLabel l = z.labels()[r];
    const TrajParam1D& a = k.axes[l.axis];
    switch (l.quantity) {
      case Quantity::kPosition: y(r) = pos[l.axis]; break;
      case Quantity::kInitialVelocity: y(r) = a.kappa_v; break;
      case Quantity::kInitialAcceleration: y(r) = a.kappa_a; break;
      case Quantity::kPeakVelocity: y(r) = a.kappa_pk; break;
    }
  }
  return y;
}

}  // namespace

bool zonotope_contains_by_solve(const Zonotope& z, const Eigen::VectorXd& y, double tol) {
  const Eigen::MatrixXd& G = z.generators();
  if (G.rows() != G.cols()) throw std::invalid_argument("zonotope_contains_by_solve: G is not square");
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
  if (!lu.isInvertible()) throw std::invalid_argument("zonotope_contains_by_solve: G is singular");
  const Eigen::VectorXd beta = lu.solve(y - z.center());
  return beta.cwiseAbs().maxCoeff() <= 1.0 + tol;
}

CheckResult check_frs_conservatism(const TimedFRS& frs, int samples, std::uint64_t seed) {
  Timer timer;
  Rng rng(seed);
  const TrajTiming& tm = frs.timing;
  const ParamBounds& b = frs.bounds;
  int violations = 0, checks = 0;
  std::ostringstream detail;
  for (int n = 0; n < samples; ++n) {
    double t;
    switch (n % 20) {
      case 0: t = 0.0; break;
      case 1: t = tm.t_pk; break;
      case 2: t = tm.t_fin; break;
      case 3: t = frs.steps[rng.index(static_cast<int>(frs.steps.size()))].t_interval.hi; break;
      default: t = rng.uniform(0.0, tm.t_fin);
    }
    TrajParam k;
    for (auto& a : k.axes) a = {rng.uniform(-b.v, b.v), rng.uniform(-b.a, b.a), rng.uniform(-b.pk, b.pk)};
    Vec3 pos;
    for (int i = 0; i < 3; ++i) pos[i] = pos_1d(t, k.axes[i], tm);
    bool covered = false;
    for (const TimedZonotope& s : frs.steps) {
      if (t < s.t_interval.lo || t > s.t_interval.hi) continue;
      covered = true;
      ++checks;
      if (!zonotope_contains_by_solve(s.zono, frs_point(s.zono, pos, k))) {
        if (violations == 0) detail << "first violation at t=" << t << "; ";
        ++violations;
      }
    }
    if (!covered) {
      ++violations;
      detail << "t=" << t << " not covered by any step; ";
    }
  }
  detail << samples << " samples, " << checks << " containment checks, " << violations << " violations";
  return finish("frs_conservatism", violations == 0, detail, timer);
}

namespace {

// Position rows of a zonotope as an affine function of k_pk with (k_v, k_a)
// fixed, plus the per-row radius of the parameter-free generators.
struct AffineSlice {
  Vec3 x0 = Vec3::Zero();
  Mat3 J = Mat3::Zero();
  Vec3 radius = Vec3::Zero();
};

AffineSlice slice_of(const Zonotope& z, const Vec3& k_v, const Vec3& k_a) {
  const auto& G = z.generators();
  std::vector<int> prow, pcol, xrow(3);
  for (int r = 0; r < z.dim(); ++r) {
    if (z.labels()[r].quantity == Quantity::kPosition)
      xrow[z.labels()[r].axis] = r;
    else
      prow.push_back(r);
  }
  for (int c = 0; c < G.cols(); ++c) {
    bool touches = false;
    for (int r : prow) touches |= G(r, c) != 0.0;
    if (touches) pcol.push_back(c);
  }
  if (prow.size() != pcol.size()) throw std::invalid_argument("slice_of: parameter block is not square");
  Eigen::MatrixXd M(prow.size(), pcol.size()), X(3, pcol.size());
  for (std::size_t i = 0; i < prow.size(); ++i)
    for (std::size_t j = 0; j < pcol.size(); ++j) M(i, j) = G(prow[i], pcol[j]);
  for (int i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < pcol.size(); ++j) X(i, j) = G(xrow[i], pcol[j]);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(M);

  auto position = [&](const Vec3& k_pk) {
    const TrajParam k = TrajParam::from_vectors(k_v, k_a, k_pk);
    Eigen::VectorXd y(prow.size());
    for (std::size_t i = 0; i < prow.size(); ++i) y(i) = frs_point(z, Vec3::Zero(), k)(prow[i]) - z.center()(prow[i]);
    const Eigen::VectorXd beta = lu.solve(y);
    Vec3 x;
    for (int i = 0; i < 3; ++i) x[i] = z.center()(xrow[i]) + X.row(i).dot(beta);
    return x;
  };
  AffineSlice s;
  s.x0 = position(Vec3::Zero());
  for (int j = 0; j < 3; ++j) s.J.col(j) = position(Vec3::Unit(j)) - s.x0;
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < G.cols(); ++c)
      if (std::find(pcol.begin(), pcol.end(), c) == pcol.end()) s.radius[i] += std::abs(G(xrow[i], c));
  return s;
}

}  // namespace

CheckResult check_unsafe_boxes(const TimedFRS& frs, int instances, double resolution, std::uint64_t seed,
                           UnsafeBoxStats* stats_out) {
  Timer timer;
  Rng rng(seed);
  UnsafeBoxStats st;
  const double v_max = std::min(frs.bounds.v, frs.bounds.pk);
  const double r_ball = std::min(v_max, 3.0 * frs.timing.t_pk);
  const Box3 body(Vec3::Zero(), Vec3::Constant(0.27));
  std::ostringstream detail;

  for (int inst = 0; inst < instances; ++inst) {
    const TimedZonotope& step = frs.steps[rng.index(static_cast<int>(frs.steps.size()))];
    ErrorBox e;
    for (int i = 0; i < 3; ++i) {
      e.lo[i] = rng.uniform(-0.1, 0.0);
      e.hi[i] = rng.uniform(0.0, 0.1);
    }
    const std::array<int, 3> rows{step.zono.row_of(Quantity::kPosition, 0),
                                  step.zono.row_of(Quantity::kPosition, 1),
                                  step.zono.row_of(Quantity::kPosition, 2)};
    const Zonotope zeps = add_box(add_box(step.zono, e.box(), rows), body, rows);
    const Vec3 k_v = rng.in_ball(v_max);
    const Vec3 k_a(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    const AffineSlice sl = slice_of(zeps, k_v, k_a);

    const Vec3 aim = sl.x0 + sl.J * (k_v + rng.in_ball(r_ball));
    Vec3 half;
    for (int i = 0; i < 3; ++i) half[i] = rng.uniform(0.05, 1.0);
    const Box3 obs(aim + Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)), half);

    const auto box = intersect_obs(zeps, obs, k_v, k_a);
    ++st.instances;
    if (box) ++st.nonempty;

    // Outward clamp (lo = min(lo, -1), hi = max(hi, +1)) for comparison.
    std::optional<Box3> outward;
    {
      Vec3 lo, hi;
      bool any = true;
      for (int i = 0; i < 3 && any; ++i) {
        const BlockCoeffs b = extract_block(zeps, i);
        const double bv = (k_v[i] - b.c_v) / b.g_v, ba = (k_a[i] - b.c_a) / b.g_a;
        const double xc = b.c_x + b.g_xv * bv + b.g_xa * ba;
        double bm = (obs.axis(i).lo - b.eps - xc) / b.g_xpk, bp = (obs.axis(i).hi + b.eps - xc) / b.g_xpk;
        if (bm > bp) std::swap(bm, bp);
        if (bm > 1 || bp < -1) {
          any = false;
          break;
        }
        lo[i] = b.g_pk * std::min(bm, -1.0);
        hi[i] = b.g_pk * std::max(bp, 1.0);
      }
      if (any) outward = Box3::from_bounds(lo, hi);
    }

    Vec3 glo, ghi;
    for (int i = 0; i < 3; ++i) {
      glo[i] = std::max(-frs.bounds.pk, k_v[i] - r_ball);
      ghi[i] = std::min(frs.bounds.pk, k_v[i] + r_ball);
    }
    const Eigen::Vector3i n = ((ghi - glo) / resolution).array().floor().cast<int>() + 1;
    bool outward_wrong = false;
    for (int a = 0; a < n[0]; ++a)
      for (int b = 0; b < n[1]; ++b)
        for (int c = 0; c < n[2]; ++c) {
          const Vec3 k = glo + resolution * Vec3(a, b, c);
          const Vec3 x = sl.x0 + sl.J * k;
          bool unsafe = true;
          for (int i = 0; i < 3 && unsafe; ++i)
            unsafe = x[i] + sl.radius[i] >= obs.axis(i).lo && x[i] - sl.radius[i] <= obs.axis(i).hi;
          ++st.grid_points;
          const bool in_box = box && box->contains(k, 1e-9);
          if (unsafe && !in_box) {
            if (st.missed == 0) detail << "instance " << inst << ": unsafe grid point outside box; ";
            ++st.missed;
          }
          if (!unsafe && box) {
            const Box3 inner(box->center, (box->half_extents.array() - resolution).max(-1.0).matrix());
            if ((inner.half_extents.array() >= 0).all() && inner.contains(k)) {
              if (st.uncovered == 0) detail << "instance " << inst << ": safe grid point deep inside box; ";
              ++st.uncovered;
            }
          }
          if (!unsafe && outward && outward->contains(k)) outward_wrong = true;
        }
    if (outward_wrong) ++st.outward_clamp_disagreements;
  }
  detail << st.instances << " instances (" << st.nonempty << " with a nonempty unsafe box), "
         << st.grid_points << " grid points, " << st.missed << " missed, " << st.uncovered
         << " over-covered; outward min/max clamp contradicts the grid on " << st.outward_clamp_disagreements
         << " instances";
  if (stats_out) *stats_out = st;
  return finish("unsafe_box_exactness", st.missed == 0 && st.uncovered == 0 && st.nonempty > 0, detail, timer);
}

CheckResult check_constraints(int instances, int points, std::uint64_t seed) {
  Timer timer;
  Rng rng(seed);
  int disagreements = 0, total = 0;
  for (int inst = 0; inst < instances; ++inst) {
    std::vector<UnsafeBox> boxes;
    const int nb = 1 + rng.index(8);
    for (int j = 0; j < nb; ++j)
    {
      // dyadic coordinates keep the closed-boundary probe free of rounding
      const auto q = [](const Vec3& v) { return Vec3((v * 64.0).array().round() / 64.0); };
      boxes.push_back({Box3(q(rng.in_ball(4.0)), q(Vec3(rng.uniform(0, 1.5), rng.uniform(0, 1.5), rng.uniform(0, 1.5)))), j, j});
    }
    const ConstraintSet cs = generate_constraints(boxes);
    for (int p = 0; p <= points; ++p) {
      Vec3 k = rng.in_ball(5.0);
      if (p == points) k = boxes[0].box.hi();  // closed boundary
      bool inside = false;
      for (const UnsafeBox& b : boxes) inside |= b.box.contains(k);
      ++total;
      if (is_safe(k, cs) == inside) ++disagreements;
    }
  }
  std::ostringstream detail;
  detail << total << " points, " << disagreements << " disagreements with box membership";
  return finish("constraint_membership", disagreements == 0, detail, timer);
}

CheckResult check_fail_safe(const Config& cfg, int samples, std::uint64_t seed) {
  Timer timer;
  Rng rng(seed);
  const QuadParams& p = cfg.quad;
  double worst_ref = 0.0, worst_speed = 0.0;
  for (int n = 0; n < samples; ++n) {
    const TrajParam k = random_feasible(rng, cfg, cfg.a_max);
    for (int i = 0; i < 3; ++i) {
      worst_ref = std::max(worst_ref, std::abs(vel_1d(cfg.timing.t_fin, k.axes[i], cfg.timing)));
      worst_ref = std::max(worst_ref, std::abs(acc_1d(cfg.timing.t_fin, k.axes[i], cfg.timing)));
    }
    const Vec3 thrust = p.mass * (k.k_a() + p.gravity * Vec3::UnitZ());
    QuadState s0{Vec3::Zero(), k.k_v(), Vec3::Zero(), attitude_from_thrust(thrust).value()};
    TrackingController ctrl(cfg.gains(), p);
    const Reference ref = [&](double t) { return ref_point_clamped(t, k, cfg.timing); };
    const auto traj = simulate(s0, [&](double t, const QuadState& s) { return ctrl.control(t, ref, s); }, 0.0,
                               cfg.timing.t_fin, cfg.dt_sim, p);
    worst_speed = std::max(worst_speed, traj.back().s.v.norm());
  }
  std::ostringstream detail;
  detail << samples << " plans: max |ref vel|,|ref acc| at t_fin = " << worst_ref
         << ", max executed speed at t_fin = " << worst_speed << " m/s";
  return finish("fail_safe", worst_ref <= 1e-9 && worst_speed < 0.05, detail, timer);
}

CheckResult check_integrators(const Config& cfg, int samples, double tol, std::uint64_t seed) {
  Timer timer;
  Rng rng(seed);
  double worst = 0.0, transient = 0.0;
  for (int n = 0; n < samples; ++n) {
    const TrajParam k = random_feasible(rng, cfg, 0.0);
    const Reference ref = [&](double t) { return ref_point_clamped(t, k, cfg.timing); };
    const QuadState s0{Vec3::Zero(), k.k_v(), Vec3::Zero(), Mat3::Identity()};
    TrackingController c1(cfg.gains(), cfg.quad), c2(cfg.gains(), cfg.quad);
    const auto lie = simulate(s0, [&](double t, const QuadState& s) { return c1.control(t, ref, s); }, 0.0,
                              cfg.timing.t_fin, cfg.dt_sim, cfg.quad, Integrator::kLieEuler);
    const auto rk = simulate(s0, [&](double t, const QuadState& s) { return c2.control(t, ref, s); }, 0.0,
                             cfg.timing.t_fin, cfg.dt_sim, cfg.quad, Integrator::kRkmk4);
    // explicit Euler lags by about dt/2 * (change in v) while the vehicle
    // accelerates; the bound applies once the plan has come to rest
    for (std::size_t i = 0; i < std::min(lie.size(), rk.size()); ++i)
      transient = std::max(transient, (lie[i].s.x - rk[i].s.x).cwiseAbs().maxCoeff());
    worst = std::max(worst, (lie.back().s.x - rk.back().s.x).cwiseAbs().maxCoeff());
  }
  std::ostringstream detail;
  detail << samples << " trajectories: max per-axis position gap at t_fin " << worst * 1e3 << " mm (limit "
         << tol * 1e3 << " mm), largest mid-flight gap " << transient * 1e3 << " mm";
  return finish("integrator_agreement", worst <= tol, detail, timer);
}

CheckResult check_endpoint_argmax(const Config& cfg, int instances, std::uint64_t seed) {
  Timer timer;
  Rng rng(seed);
  int failures = 0;
  double worst_matched = 0.0, worst_linearity = 0.0;
  for (int n = 0; n < instances; ++n) {
    const double kp = -rng.uniform(0.5, 20.0), kd = -rng.uniform(0.5, 10.0);
    const TrajParam1D ref{rng.uniform(-cfg.bounds.v, cfg.bounds.v), rng.uniform(-cfg.bounds.a, cfg.bounds.a),
                          rng.uniform(-cfg.bounds.pk, cfg.bounds.pk)};
    double a = rng.uniform(-cfg.v_max, cfg.v_max), b = rng.uniform(-cfg.v_max, cfg.v_max);
    if (a > b) std::swap(a, b);
    if (b - a < 0.1) b = a + 0.1;
    const EndpointArgmaxReport r = endpoint_argmax_experiment(kp, kd, Interval(a, b), ref, cfg.timing);
    if (!r.holds()) ++failures;
    worst_matched = std::max(worst_matched, r.max_error_at_matched_speed);
    worst_linearity = std::max(worst_linearity, r.max_linearity_residual);
  }
  std::ostringstream detail;
  detail << instances << " instances, " << failures << " with an interior argmax; max error at matched speed "
         << worst_matched << " m; max deviation from linearity " << worst_linearity << " m";
  return finish("endpoint_argmax", failures == 0 && worst_matched <= 1e-9 && worst_linearity <= 1e-6,
                detail, timer);
}

CheckResult check_table_replay(const TrackingErrorTable& table, const Config& cfg, double bound) {
  Timer timer;
  const Cover& cover = table.cover();
  const double dv = cover.spec().dv, dt = cover.spec().dt;

  // Corners of retained cells, keyed on the half-step lattice.
  std::map<std::array<long long, 3>, std::pair<Vec3, std::vector<int>>> vertices;
  for (int c = 0; c < cover.num_cells(); ++c) {
    const Box3 box = cover.cell_box(c);
    for (int m = 0; m < 8; ++m) {
      Vec3 v;
      for (int i = 0; i < 3; ++i) v[i] = (m >> i) & 1 ? box.hi()[i] : box.lo()[i];
      const std::array<long long, 3> key{std::llround(2 * v[0] / dv), std::llround(2 * v[1] / dv),
                                         std::llround(2 * v[2] / dv)};
      auto& entry = vertices[key];
      entry.first = v;
      entry.second.push_back(c);
    }
  }

  double worst = 0.0;
  long long samples = 0, outside = 0;
  std::ostringstream detail;
  const int bins = cover.num_bins();
  for (const auto& [key, entry] : vertices) {
    const auto& [k_v, cells] = entry;
    for (const Vec3& k_pk : feasible_peak_vels(k_v, cfg.timing.t_pk, cfg.a_max, cfg.v_max)) {
      const SampleTrace tr = trace_sample(k_v, k_pk, cfg.quad, cfg.gains(), cfg.timing, cfg.dt_sim);
      for (std::size_t n = 0; n < tr.t.size(); ++n) {
        const Vec3& e = tr.e_x[n];
        worst = std::max(worst, e.cwiseAbs().maxCoeff());
        ++samples;
        const double x = tr.t[n] / dt;
        std::vector<int> in_bins;
        const double r = std::round(x);
        if (std::abs(x - r) < 1e-9) {
          if (r >= 1) in_bins.push_back(static_cast<int>(r) - 1);
          if (r < bins) in_bins.push_back(static_cast<int>(r));
        } else {
          in_bins.push_back(std::min(bins - 1, static_cast<int>(std::floor(x))));
        }
        for (int c : cells)
          for (int j : in_bins)
            if (!table.at(j, c).contains(e)) {
              if (outside == 0)
                detail << "sample k_v=(" << k_v.transpose() << ") t=" << tr.t[n] << " outside cell " << c
                       << " bin " << j << "; ";
              ++outside;
            }
      }
    }
  }
  detail << vertices.size() << " vertices, " << samples << " samples, " << outside
         << " outside their boxes; max |e_x|_inf = " << worst << " m (limit " << bound << " m)";
  return finish("table_replay", outside == 0 && worst <= bound, detail, timer);
}

CheckResult check_cover_cardinality() {
  Timer timer;
  const Cover c(CoverSpec{5.0, 0.7, 0.02, 3.0});
  std::ostringstream detail;
  detail << c.num_bins() << " bins x " << c.num_cells() << " cells (" << c.side() << " per axis) = " << c.size()
         << " subdomains; reference count 102900 = 150 x 686";
  return finish("cover_cardinality", c.size() == 102900, detail, timer, true);
}

}  // namespace rtd
