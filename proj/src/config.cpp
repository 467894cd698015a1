#include "rtd/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "rtd/artifact.hpp"

namespace rtd {

namespace {

using Setter = std::function<void(Config&, const std::string&)>;
using Getter = std::function<std::string(const Config&)>;

struct Key {
  const char* name;
  Setter set;
  Getter get;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& s) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw std::invalid_argument("config key '" + key + "': '" + s + "' is not a number");
  return v;
}

long long parse_int(const std::string& key, const std::string& s) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::invalid_argument("config key '" + key + "': '" + s + "' is not an integer");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("config key '" + key + "': '" + s + "' is not a boolean");
}

template <typename F>
Key dbl(const char* name, F member) {
  return {name, [name, member](Config& c, const std::string& s) { member(c) = parse_double(name, s); },
          [member](const Config& c) { return fmt(member(const_cast<Config&>(c))); }};
}

template <typename F>
Key integer(const char* name, F member) {
  return {name,
          [name, member](Config& c, const std::string& s) {
            member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_int(name, s));
          },
          [member](const Config& c) { return std::to_string(member(const_cast<Config&>(c))); }};
}

template <typename F>
Key boolean(const char* name, F member) {
  return {name, [name, member](Config& c, const std::string& s) { member(c) = parse_bool(name, s); },
          [member](const Config& c) { return std::string(member(const_cast<Config&>(c)) ? "true" : "false"); }};
}

#define RTD_FIELD(expr) [](Config& c) -> auto& { return expr; }

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      dbl("mass", RTD_FIELD(c.quad.mass)),
      dbl("j1", RTD_FIELD(c.quad.inertia[0])),
      dbl("j2", RTD_FIELD(c.quad.inertia[1])),
      dbl("j3", RTD_FIELD(c.quad.inertia[2])),
      dbl("k_tau", RTD_FIELD(c.quad.k_tau)),
      dbl("k_mu", RTD_FIELD(c.quad.k_mu)),
      dbl("arm", RTD_FIELD(c.quad.arm)),
      dbl("rotor_min", RTD_FIELD(c.quad.rotor_min)),
      dbl("rotor_max", RTD_FIELD(c.quad.rotor_max)),
      dbl("g", RTD_FIELD(c.quad.gravity)),
      dbl("gx", RTD_FIELD(c.gx)),
      dbl("gv", RTD_FIELD(c.gv)),
      dbl("gr", RTD_FIELD(c.gr)),
      dbl("gw", RTD_FIELD(c.gw)),
      dbl("t_plan", RTD_FIELD(c.timing.t_plan)),
      dbl("t_pk", RTD_FIELD(c.timing.t_pk)),
      dbl("t_fin", RTD_FIELD(c.timing.t_fin)),
      dbl("kv_bound", RTD_FIELD(c.bounds.v)),
      dbl("ka_bound", RTD_FIELD(c.bounds.a)),
      dbl("kpk_bound", RTD_FIELD(c.bounds.pk)),
      dbl("v_max", RTD_FIELD(c.v_max)),
      dbl("a_max", RTD_FIELD(c.a_max)),
      dbl("d_sense", RTD_FIELD(c.d_sense)),
      dbl("body_width", RTD_FIELD(c.body_width)),
      dbl("err_dv", RTD_FIELD(c.err_dv)),
      dbl("err_dt", RTD_FIELD(c.err_dt)),
      dbl("err_slack", RTD_FIELD(c.err_slack)),
      dbl("dt_sim", RTD_FIELD(c.dt_sim)),
      dbl("frs_dt", RTD_FIELD(c.frs_dt)),
      dbl("waypoint_distance", RTD_FIELD(c.waypoint_distance)),
      integer("num_samples", RTD_FIELD(c.num_samples)),
      boolean("horizon_check", RTD_FIELD(c.horizon_check)),
      dbl("wall_thickness", RTD_FIELD(c.wall_thickness)),
      dbl("constant_error", RTD_FIELD(c.constant_error)),
      dbl("goal_radius", RTD_FIELD(c.goal_radius)),
      dbl("max_time", RTD_FIELD(c.max_time)),
      integer("stop_iterations", RTD_FIELD(c.stop_iterations)),
      dbl("rest_speed", RTD_FIELD(c.rest_speed)),
      dbl("stuck_time", RTD_FIELD(c.stuck_time)),
      dbl("stuck_progress", RTD_FIELD(c.stuck_progress)),
      dbl("world_x", RTD_FIELD(c.world.size[0])),
      dbl("world_y", RTD_FIELD(c.world.size[1])),
      dbl("world_z", RTD_FIELD(c.world.size[2])),
      integer("n_obstacles", RTD_FIELD(c.world.num_obstacles)),
      dbl("obstacle_min", RTD_FIELD(c.world.min_extent)),
      dbl("obstacle_max", RTD_FIELD(c.world.max_extent)),
      dbl("clearance", RTD_FIELD(c.world.clearance)),
      dbl("end_fraction", RTD_FIELD(c.world.end_fraction)),
      dbl("margin", RTD_FIELD(c.world.margin)),
      boolean("deterministic", RTD_FIELD(c.deterministic)),
      dbl("plan_budget", RTD_FIELD(c.plan_budget)),
      integer("threads", RTD_FIELD(c.threads)),
      integer("seed", RTD_FIELD(c.seed)),
  };
  return k;
}

#undef RTD_FIELD

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string joined(const Config& c, std::initializer_list<const char*> names) {
  std::string out;
  for (const char* n : names)
    for (const Key& k : keys())
      if (std::string(k.name) == n) out += std::string(n) + "=" + k.get(c) + ";";
  return out;
}

}  // namespace

double stopping_distance(const TrajTiming& timing, double v_max) {
  const AffineCoeffs a_pk = affine_pos_coeffs(timing.t_pk, timing);
  const AffineCoeffs a_fin = affine_pos_coeffs(timing.t_fin, timing);
  return std::abs(((a_fin.v - a_pk.v) + (a_fin.pk - a_pk.pk)) * v_max);
}

void Config::validate() const {
  quad.validate();
  gains().validate();
  timing.validate();
  bounds.validate();
  world.validate();
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("config: " + what);
  };
  require(timing.t_plan < timing.t_pk, "t_plan must be < t_pk");
  require(v_max > 0 && a_max > 0, "v_max and a_max must be positive");
  require(v_max <= bounds.pk, "v_max must not exceed kpk_bound");
  require(v_max <= bounds.v, "v_max must not exceed kv_bound");
  require(a_max < quad.gravity, "a_max must be below g");
  require(body_width > 0, "body_width must be positive");
  require(err_dv > 0 && err_dt > 0 && dt_sim > 0 && frs_dt > 0, "resolutions must be positive");
  require(err_slack >= 0, "err_slack must be >= 0");
  require(waypoint_distance > 0, "waypoint_distance must be positive");
  require(num_samples > 0, "num_samples must be positive");
  require(wall_thickness > 0, "wall_thickness must be positive");
  require(constant_error >= 0, "constant_error must be >= 0");
  require(goal_radius > 0 && max_time > 0, "goal_radius and max_time must be positive");
  require(stop_iterations > 0 && rest_speed > 0, "stop_iterations and rest_speed must be positive");
  require(stuck_time > 0 && stuck_progress >= 0, "stuck_time must be positive and stuck_progress >= 0");
  require(threads >= 0, "threads must be >= 0");
  require(plan_budget > 0, "plan_budget must be positive");
  const double needed = stopping_distance(timing, v_max) + v_max * timing.t_plan;
  require(d_sense >= needed, "d_sense = " + fmt(d_sense) + " is below stopping distance + v_max t_plan = " + fmt(needed));
  const double steps = timing.t_plan / dt_sim;
  require(std::abs(steps - std::round(steps)) < 1e-9, "t_plan must be a multiple of dt_sim");
}

Gains Config::gains() const {
  Gains g;
  g.x = Vec3::Constant(gx);
  g.v = Vec3::Constant(gv);
  g.R = Vec3::Constant(gr);
  g.omega = Vec3::Constant(gw);
  return g;
}

Box3 Config::body() const { return Box3(Vec3::Zero(), Vec3::Constant(0.5 * body_width)); }

CoverSpec Config::cover_spec() const { return CoverSpec{v_max, err_dv, err_dt, timing.t_fin}; }

TableBuildOptions Config::table_options() const {
  TableBuildOptions o;
  o.dt_sim = dt_sim;
  o.slack = err_slack;
  o.a_max = a_max;
  o.config_hash = table_hash();
  o.threads = static_cast<unsigned>(threads);
  return o;
}

PlannerConfig Config::planner() const {
  PlannerConfig p;
  p.timing = timing;
  p.bounds = bounds;
  p.v_max = v_max;
  p.a_max = a_max;
  p.d_sense = d_sense;
  p.wall_thickness = wall_thickness;
  p.body = body();
  p.waypoint_distance = waypoint_distance;
  p.num_samples = num_samples;
  p.horizon_check = horizon_check;
  if (deterministic) {
    p.budget.wall_seconds = 0.0;
    p.budget.max_batches = -1;
  } else {
    p.budget.wall_seconds = plan_budget;
  }
  return p;
}

TrialConfig Config::trial() const {
  TrialConfig t;
  t.planner = planner();
  t.quad = quad;
  t.gains = gains();
  t.dt_sim = dt_sim;
  t.goal_radius = goal_radius;
  t.max_time = max_time;
  t.stop_iterations = stop_iterations;
  t.rest_speed = rest_speed;
  t.stuck_time = stuck_time;
  t.stuck_progress = stuck_progress;
  t.constant_error = constant_error;
  return t;
}

std::uint64_t Config::frs_hash() const {
  return fnv1a64("frs;" + joined(*this, {"t_plan", "t_pk", "t_fin", "kv_bound", "ka_bound", "kpk_bound", "frs_dt"}));
}

std::uint64_t Config::table_hash() const {
  return fnv1a64("table;" + joined(*this, {"mass", "j1", "j2", "j3", "k_tau", "k_mu", "arm", "rotor_min",
                                           "rotor_max", "g", "gx", "gv", "gr", "gw", "t_plan", "t_pk",
                                           "t_fin", "v_max", "a_max", "err_dv", "err_dt", "err_slack",
                                           "dt_sim"}));
}

Config parse_config(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool found = false;
    for (const Key& k : keys())
      if (key == k.name) {
        k.set(c, value);
        found = true;
        break;
      }
    if (!found) throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const Config& c) {
  std::string out;
  for (const Key& k : keys()) out += std::string(k.name) + " = " + k.get(c) + "\n";
  return out;
}

}  // namespace rtd
