#include "rtd/tracking_error.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rtd/artifact.hpp"
#include "rtd/parallel.hpp"

namespace rtd {

void CoverSpec::validate() const {
  if (!(v_max > 0 && dv > 0 && dt > 0 && t_fin > 0))
    throw std::invalid_argument("cover resolution and limits must be positive");
}

Cover::Cover(const CoverSpec& spec) : spec_(spec) {
  spec_.validate();
  num_bins_ = std::max(1, static_cast<int>(std::ceil(spec_.t_fin / spec_.dt - 1e-9)));
  side_ = std::max(1, static_cast<int>(std::ceil(2.0 * spec_.v_max / spec_.dv - 1e-9)));
  grid_lo_ = -0.5 * side_ * spec_.dv;

  const int n = side_ * side_ * side_;
  dense_.assign(n, -1);
  std::vector<Vec3> centers;
  for (int i = 0; i < side_; ++i)
    for (int j = 0; j < side_; ++j)
      for (int k = 0; k < side_; ++k) {
        const Vec3 lo(vertex_coord(i), vertex_coord(j), vertex_coord(k));
        const Box3 box = Box3::from_bounds(lo, lo + Vec3::Constant(spec_.dv));
        if (box.distance_to(Vec3::Zero()) <= spec_.v_max + 1e-12) {
          dense_[flat({i, j, k})] = static_cast<int>(cells_.size());
          cells_.push_back({i, j, k});
          centers.push_back(box.center);
        }
      }

  nearest_.assign(n, -1);
  for (int i = 0; i < side_; ++i)
    for (int j = 0; j < side_; ++j)
      for (int k = 0; k < side_; ++k) {
        const int f = flat({i, j, k});
        if (dense_[f] >= 0) {
          nearest_[f] = dense_[f];
          continue;
        }
        const Vec3 c = Vec3(vertex_coord(i), vertex_coord(j), vertex_coord(k)) +
                       Vec3::Constant(0.5 * spec_.dv);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < centers.size(); ++m) {
          const double d = (centers[m] - c).squaredNorm();
          if (d < best) {
            best = d;
            nearest_[f] = static_cast<int>(m);
          }
        }
      }
}

Interval Cover::bin(int j) const {
  return Interval(j * spec_.dt, std::min((j + 1) * spec_.dt, spec_.t_fin));
}

int Cover::bin_of(double t) const {
  if (!(t >= -1e-9 && t <= spec_.t_fin + 1e-9))
    throw std::out_of_range("time " + std::to_string(t) + " outside [0, t_fin]");
  const int j = static_cast<int>(std::floor(std::max(t, 0.0) / spec_.dt + 1e-9));
  return std::clamp(j, 0, num_bins_ - 1);
}

Box3 Cover::cell_box(int cell) const {
  const auto& c = cells_.at(cell);
  const Vec3 lo(vertex_coord(c[0]), vertex_coord(c[1]), vertex_coord(c[2]));
  return Box3::from_bounds(lo, lo + Vec3::Constant(spec_.dv));
}

std::array<int, 3> Cover::grid_coords(const Vec3& k_v) const {
  std::array<int, 3> c{};
  for (int i = 0; i < 3; ++i)
    c[i] = std::clamp(static_cast<int>(std::floor((k_v[i] - grid_lo_) / spec_.dv)), 0, side_ - 1);
  return c;
}

int Cover::cell_of(const Vec3& k_v) const {
  if (!k_v.allFinite()) return -1;
  if ((k_v.array() < grid_lo_).any() || (k_v.array() > -grid_lo_).any()) return -1;
  return dense_[flat(grid_coords(k_v))];
}

int Cover::nearest_cell(const Vec3& k_v) const {
  if (!k_v.allFinite()) throw std::invalid_argument("nearest_cell: non-finite velocity");
  const int c = cell_of(k_v);
  return c >= 0 ? c : nearest_[flat(grid_coords(k_v))];
}

std::vector<Subdomain> Cover::subdomains() const {
  std::vector<Subdomain> out;
  out.reserve(size());
  for (int j = 0; j < num_bins_; ++j)
    for (int c = 0; c < num_cells(); ++c) out.push_back({bin(j), cell_box(c)});
  return out;
}

Cover build_cover(const CoverSpec& spec) { return Cover(spec); }

std::array<Vec3, 8> feasible_peak_vels(const Vec3& k_v, double t_pk, double a_max, double v_max) {
  std::array<Vec3, 8> out;
  const double b_acc = a_max * t_pk / std::sqrt(3.0);
  for (int n = 0; n < 8; ++n) {
    const Vec3 sigma((n & 1) ? 1.0 : -1.0, (n & 2) ? 1.0 : -1.0, (n & 4) ? 1.0 : -1.0);
    // ||b sigma + k_v||^2 <= v_max^2  <=>  3 b^2 + 2 b (sigma . k_v) + |k_v|^2 - v_max^2 <= 0
    const double s = sigma.dot(k_v);
    const double disc = s * s - 3.0 * (k_v.squaredNorm() - v_max * v_max);
    double b_vel = 0.0;
    if (disc >= 0.0) b_vel = std::max(0.0, (-s + std::sqrt(disc)) / 3.0);
    double b = std::min(b_acc, b_vel);
    // Guard both limits against round-off at the boundary.
    const auto violates = [&](double bb) {
      return (bb * sigma + k_v).norm() > v_max || (bb * sigma).norm() / t_pk > a_max;
    };
    for (int guard = 0; guard < 8 && b > 0.0 && violates(b); ++guard) b = std::nextafter(b, 0.0);
    if (violates(b)) b = 0.0;
    out[n] = b * sigma + k_v;
  }
  return out;
}

ErrorBox ErrorBox::symmetric(double half_width) {
  return {Vec3::Constant(-half_width), Vec3::Constant(half_width)};
}

void ErrorBox::include(const Vec3& e) {
  lo = lo.cwiseMin(e);
  hi = hi.cwiseMax(e);
}

void ErrorBox::unite(const ErrorBox& other) {
  lo = lo.cwiseMin(other.lo);
  hi = hi.cwiseMax(other.hi);
}

void ErrorBox::inflate(double amount) {
  lo.array() -= amount;
  hi.array() += amount;
}

bool ErrorBox::contains(const Vec3& e, double tol) const {
  return (e.array() >= lo.array() - tol).all() && (e.array() <= hi.array() + tol).all();
}

TrackingErrorTable::TrackingErrorTable(const CoverSpec& spec, TrajTiming timing,
                                       std::vector<ErrorBox> boxes, TableMetadata meta)
    : cover_(spec), timing_(timing), boxes_(std::move(boxes)), meta_(meta) {
  if (boxes_.size() != cover_.size())
    throw std::invalid_argument("TrackingErrorTable: box count does not match cover");
  if (std::abs(timing_.t_fin - spec.t_fin) > 1e-12)
    throw std::invalid_argument("TrackingErrorTable: cover and timing disagree on t_fin");
}

ErrorBox TrackingErrorTable::query(double t, const Vec3& k_v) const {
  return at(cover_.bin_of(t), cover_.nearest_cell(k_v));
}

ErrorBox TrackingErrorTable::query_interval(const Interval& t, const Vec3& k_v) const {
  const int cell = cover_.nearest_cell(k_v);
  const double dt = cover_.spec().dt;
  const int first = cover_.bin_of(t.lo);
  // Bins whose interior overlaps t; a step ending exactly on a bin edge stays in the earlier bin.
  int last = cover_.bin_of(t.hi);
  if (last > first && std::abs(t.hi - last * dt) < 1e-9) --last;
  ErrorBox out = at(first, cell);
  for (int j = first + 1; j <= last; ++j) out.unite(at(j, cell));
  return out;
}

double TrackingErrorTable::max_abs_error() const {
  double m = 0.0;
  for (const ErrorBox& b : boxes_)
    if (!b.empty()) m = std::max(m, b.max_abs());
  return m;
}

bool TrackingErrorTable::operator==(const TrackingErrorTable& other) const {
  if (!(timing_ == other.timing_) || boxes_.size() != other.boxes_.size()) return false;
  const CoverSpec &a = cover_.spec(), &b = other.cover_.spec();
  if (a.dv != b.dv || a.dt != b.dt || a.t_fin != b.t_fin || a.v_max != b.v_max) return false;
  for (std::size_t i = 0; i < boxes_.size(); ++i)
    if (boxes_[i].lo != other.boxes_[i].lo || boxes_[i].hi != other.boxes_[i].hi) return false;
  return meta_.config_hash == other.meta_.config_hash;
}

namespace {

constexpr char kTableMagic[8] = {'R', 'T', 'D', 'E', 'R', 'R', 'T', 'B'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw ArtifactError("error table '" + path + "' is truncated");
  return v;
}

}  // namespace

void TrackingErrorTable::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ArtifactError("cannot write error table '" + path + "'");
  const CoverSpec& s = cover_.spec();
  os.write(kTableMagic, sizeof(kTableMagic));
  put(os, kVersion);
  put(os, std::uint32_t{0});
  put(os, s.dv);
  put(os, s.dt);
  put(os, s.t_fin);
  put(os, s.v_max);
  put(os, timing_.t_plan);
  put(os, timing_.t_pk);
  put(os, meta_.config_hash);
  put(os, static_cast<std::uint32_t>(cover_.num_bins()));
  put(os, static_cast<std::uint32_t>(cover_.num_cells()));
  for (const ErrorBox& b : boxes_) {
    for (int i = 0; i < 3; ++i) put(os, b.lo[i]);
    for (int i = 0; i < 3; ++i) put(os, b.hi[i]);
  }
  if (!os) throw ArtifactError("failed writing error table '" + path + "'");

  nlohmann::json side{{"format", "rtd-error-table"},
                      {"version", kVersion},
                      {"config_hash", hash_to_hex(meta_.config_hash)},
                      {"dv", s.dv},
                      {"dt", s.dt},
                      {"t_fin", s.t_fin},
                      {"v_max", s.v_max},
                      {"t_plan", timing_.t_plan},
                      {"t_pk", timing_.t_pk},
                      {"num_bins", cover_.num_bins()},
                      {"num_cells", cover_.num_cells()},
                      {"num_subdomains", cover_.size()},
                      {"dt_sim", meta_.dt_sim},
                      {"slack", meta_.slack},
                      {"a_max", meta_.a_max},
                      {"num_simulations", meta_.num_simulations},
                      {"num_samples", meta_.num_samples},
                      {"max_raw_error", meta_.max_raw_error},
                      {"max_abs_error", max_abs_error()},
                      {"build_seconds", meta_.build_seconds}};
  std::ofstream js(path + ".json");
  js << side.dump(2) << '\n';
}

TrackingErrorTable TrackingErrorTable::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArtifactError("error table '" + path + "' not found");
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kTableMagic, sizeof(magic)) != 0)
    throw ArtifactError("'" + path + "' is not an error table");
  const auto version = get<std::uint32_t>(is, path);
  if (version != kVersion)
    throw ArtifactError("error table '" + path + "' has version " + std::to_string(version) +
                        ", expected " + std::to_string(kVersion));
  get<std::uint32_t>(is, path);
  CoverSpec s;
  s.dv = get<double>(is, path);
  s.dt = get<double>(is, path);
  s.t_fin = get<double>(is, path);
  s.v_max = get<double>(is, path);
  TrajTiming timing;
  timing.t_plan = get<double>(is, path);
  timing.t_pk = get<double>(is, path);
  timing.t_fin = s.t_fin;
  TableMetadata meta;
  meta.config_hash = get<std::uint64_t>(is, path);
  const auto bins = get<std::uint32_t>(is, path);
  const auto cells = get<std::uint32_t>(is, path);
  Cover cover(s);
  if (bins != static_cast<std::uint32_t>(cover.num_bins()) ||
      cells != static_cast<std::uint32_t>(cover.num_cells()))
    throw ArtifactError("error table '" + path + "' header does not match its cover");
  std::vector<ErrorBox> boxes(cover.size());
  for (ErrorBox& b : boxes) {
    for (int i = 0; i < 3; ++i) b.lo[i] = get<double>(is, path);
    for (int i = 0; i < 3; ++i) b.hi[i] = get<double>(is, path);
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw ArtifactError("error table '" + path + "' has trailing bytes");

  std::ifstream js(path + ".json");
  if (js) {
    try {
      const auto side = nlohmann::json::parse(js);
      meta.dt_sim = side.value("dt_sim", meta.dt_sim);
      meta.slack = side.value("slack", meta.slack);
      meta.a_max = side.value("a_max", meta.a_max);
      meta.num_simulations = side.value("num_simulations", std::size_t{0});
      meta.num_samples = side.value("num_samples", std::size_t{0});
      meta.max_raw_error = side.value("max_raw_error", 0.0);
      meta.build_seconds = side.value("build_seconds", 0.0);
    } catch (const nlohmann::json::exception& e) {
      throw ArtifactError("error table sidecar '" + path + ".json' is corrupt: " + e.what());
    }
  }
  return TrackingErrorTable(s, timing, std::move(boxes), meta);
}

SampleTrace trace_sample(const Vec3& k_v, const Vec3& k_pk, const QuadParams& params,
                         const Gains& gains, const TrajTiming& timing, double dt_sim) {
  const TrajParam k = TrajParam::from_vectors(k_v, Vec3::Zero(), k_pk);
  const Reference ref = [&](double t) { return ref_point_clamped(t, k, timing); };
  TrackingController ctrl(gains, params);
  const ControlFn u = [&](double t, const QuadState& s) { return ctrl.control(t, ref, s); };
  const QuadState s0{Vec3::Zero(), k_v, Vec3::Zero(), Mat3::Identity()};
  const auto traj = simulate(s0, u, 0.0, timing.t_fin, dt_sim, params);
  SampleTrace out{k_v, k_pk, {}, {}};
  out.t.reserve(traj.size());
  out.e_x.reserve(traj.size());
  for (const TimedState& ts : traj) {
    out.t.push_back(ts.t);
    out.e_x.push_back(ts.s.x - ref_point_clamped(ts.t, k, timing).pos);
  }
  return out;
}

TrackingErrorTable compute_table(const Cover& cover, const QuadParams& params, const Gains& gains,
                                 const TrajTiming& timing, const TableBuildOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  timing.validate();
  if (std::abs(timing.t_fin - cover.spec().t_fin) > 1e-12)
    throw std::invalid_argument("compute_table: cover and timing disagree on t_fin");

  const int vside = cover.side() + 1;
  auto vflat = [vside](int i, int j, int k) { return (i * vside + j) * vside + k; };
  std::vector<int> vertex_slot(vside * vside * vside, -1);
  std::vector<std::array<int, 3>> vertices;
  for (int c = 0; c < cover.num_cells(); ++c) {
    const auto& cc = cover.cell_coords(c);
    for (int n = 0; n < 8; ++n) {
      const int i = cc[0] + (n & 1), j = cc[1] + ((n >> 1) & 1), k = cc[2] + ((n >> 2) & 1);
      int& slot = vertex_slot[vflat(i, j, k)];
      if (slot < 0) {
        slot = static_cast<int>(vertices.size());
        vertices.push_back({i, j, k});
      }
    }
  }

  const int bins = cover.num_bins();
  const double dt_bin = cover.spec().dt;
  std::vector<ErrorBox> per_vertex(vertices.size() * bins);
  std::vector<double> vertex_max(vertices.size(), 0.0);
  std::vector<std::size_t> vertex_samples(vertices.size(), 0);

  parallel_for(
      vertices.size(),
      [&](std::size_t v) {
        const auto& vc = vertices[v];
        const Vec3 k_v(cover.vertex_coord(vc[0]), cover.vertex_coord(vc[1]),
                       cover.vertex_coord(vc[2]));
        for (const Vec3& k_pk : feasible_peak_vels(k_v, timing.t_pk, options.a_max, cover.spec().v_max)) {
          SampleTrace tr;
          try {
            tr = trace_sample(k_v, k_pk, params, gains, timing, options.dt_sim);
          } catch (const std::runtime_error& e) {
            std::ostringstream msg;
            msg << "tracking-error sample diverged (k_v = " << k_v.transpose()
                << ", k_pk = " << k_pk.transpose() << "): " << e.what();
            throw std::runtime_error(msg.str());
          }
          for (std::size_t n = 0; n < tr.t.size(); ++n) {
            const Vec3& e = tr.e_x[n];
            vertex_max[v] = std::max(vertex_max[v], e.cwiseAbs().maxCoeff());
            const double x = tr.t[n] / dt_bin;
            const double r = std::round(x);
            const int j = cover.bin_of(tr.t[n]);
            per_vertex[v * bins + j].include(e);
            // Samples on a shared bin edge belong to both closed bins.
            if (std::abs(x - r) < 1e-9 && r >= 1 && r <= bins - 1 && static_cast<int>(r) == j)
              per_vertex[v * bins + j - 1].include(e);
          }
          vertex_samples[v] += tr.t.size();
        }
      },
      options.threads);

  std::vector<ErrorBox> boxes(cover.size());
  for (int c = 0; c < cover.num_cells(); ++c) {
    const auto& cc = cover.cell_coords(c);
    for (int n = 0; n < 8; ++n) {
      const int v = vertex_slot[vflat(cc[0] + (n & 1), cc[1] + ((n >> 1) & 1), cc[2] + ((n >> 2) & 1))];
      for (int j = 0; j < bins; ++j)
        boxes[static_cast<std::size_t>(j) * cover.num_cells() + c].unite(per_vertex[v * bins + j]);
    }
  }
  for (ErrorBox& b : boxes) b.inflate(options.slack);

  TableMetadata meta;
  meta.config_hash = options.config_hash;
  meta.dt_sim = options.dt_sim;
  meta.slack = options.slack;
  meta.a_max = options.a_max;
  meta.num_simulations = vertices.size() * 8;
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    meta.num_samples += vertex_samples[v];
    meta.max_raw_error = std::max(meta.max_raw_error, vertex_max[v]);
  }
  meta.build_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return TrackingErrorTable(cover.spec(), timing, std::move(boxes), meta);
}

EndpointArgmaxReport endpoint_argmax_experiment(double kp, double kd, const Interval& initial_speeds,
                             const TrajParam1D& reference, const TrajTiming& timing,
                             int grid_points, double dt) {
  if (grid_points < 2) throw std::invalid_argument("endpoint_argmax_experiment: need at least 2 grid points");
  auto accel = [&](double t, double p, double v) {
    const double tt = std::min(t, timing.t_fin);
    return acc_1d(tt, reference, timing) + kp * (p - pos_1d(tt, reference, timing)) +
           kd * (v - vel_1d(tt, reference, timing));
  };
  const int steps = static_cast<int>(std::round(timing.t_fin / dt));
  const int stride = std::max(1, steps / 60);

  // error[g][m] for speed grid point g at recorded time m
  auto run = [&](double v0) {
    std::vector<double> err;
    double p = 0.0, v = v0;
    for (int n = 0; n <= steps; ++n) {
      const double t = n * dt;
      if (n % stride == 0) err.push_back(p - pos_1d(std::min(t, timing.t_fin), reference, timing));
      if (n == steps) break;
      const double k1p = v, k1v = accel(t, p, v);
      const double k2p = v + 0.5 * dt * k1v, k2v = accel(t + 0.5 * dt, p + 0.5 * dt * k1p, v + 0.5 * dt * k1v);
      const double k3p = v + 0.5 * dt * k2v, k3v = accel(t + 0.5 * dt, p + 0.5 * dt * k2p, v + 0.5 * dt * k2v);
      const double k4p = v + dt * k3v, k4v = accel(t + dt, p + dt * k3p, v + dt * k3v);
      p += dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
      v += dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
    }
    return err;
  };

  std::vector<double> speeds(grid_points);
  std::vector<std::vector<double>> errors(grid_points);
  for (int g = 0; g < grid_points; ++g) {
    speeds[g] = initial_speeds.lo + initial_speeds.width() * g / (grid_points - 1);
    errors[g] = run(speeds[g]);
  }
  const std::vector<double> matched = run(reference.kappa_v);

  EndpointArgmaxReport rep;
  rep.num_times = static_cast<int>(matched.size());
  for (double e : matched) rep.max_error_at_matched_speed = std::max(rep.max_error_at_matched_speed, std::abs(e));

  // The endpoint farther from the reference speed carries the per-unit slope.
  const int far = std::abs(speeds.front() - reference.kappa_v) >= std::abs(speeds.back() - reference.kappa_v)
                      ? 0
                      : grid_points - 1;
  const double far_dv = speeds[far] - reference.kappa_v;
  for (int m = 0; m < rep.num_times; ++m) {
    const double endpoint = std::max(std::abs(errors.front()[m]), std::abs(errors.back()[m]));
    double scale = 1e-12;
    for (int g = 0; g < grid_points; ++g) scale = std::max(scale, std::abs(errors[g][m]));
    bool violated = false;
    for (int g = 1; g + 1 < grid_points; ++g)
      if (std::abs(errors[g][m]) > endpoint + 1e-9 * scale) violated = true;
    if (violated) ++rep.num_violations;
    if (std::abs(far_dv) > 1e-12) {
      const double slope = std::abs(errors[far][m]) / std::abs(far_dv);
      for (int g = 0; g < grid_points; ++g) {
        const double predicted = slope * std::abs(speeds[g] - reference.kappa_v);
        rep.max_linearity_residual =
            std::max(rep.max_linearity_residual, std::abs(std::abs(errors[g][m]) - predicted));
      }
    }
  }
  return rep;
}

}  // namespace rtd
