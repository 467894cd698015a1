#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rtd/artifact.hpp"
#include "rtd/config.hpp"
#include "rtd/verify.hpp"
#include "rtd/world_bench.hpp"

namespace py = pybind11;
using namespace rtd;

namespace {

Eigen::MatrixXd obstacles_array(const std::vector<Obstacle>& obs) {
  // rows of lo1 lo2 lo3 hi1 hi2 hi3
  Eigen::MatrixXd m(obs.size(), 6);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    m.row(i).head<3>() = obs[i].lo();
    m.row(i).tail<3>() = obs[i].hi();
  }
  return m;
}

py::dict trial_dict(const TrialResult& r) {
  py::dict d = py::module_::import("json").attr("loads")(trial_json(r).dump());
  if (!r.trace.empty()) {
    Eigen::MatrixXd tr(r.trace.size(), 10);
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
      const TraceSample& s = r.trace[i];
      tr.row(i) << s.t, s.x.transpose(), s.v.transpose(), s.ref.transpose();
    }
    d["trace"] = tr;
  }
  return d;
}

py::dict check_dict(const CheckResult& c) {
  py::dict d;
  d["name"] = c.name;
  d["passed"] = c.pass;
  d["soft"] = c.soft;
  d["detail"] = c.detail;
  d["seconds"] = c.seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(pyrtd, m) {
  m.doc() = "Reachability-based trajectory design for quadrotors";

  py::register_exception<ArtifactError>(m, "ArtifactError", PyExc_RuntimeError);

  py::class_<TrajTiming>(m, "TrajTiming")
      .def(py::init<>())
      .def_readwrite("t_plan", &TrajTiming::t_plan)
      .def_readwrite("t_pk", &TrajTiming::t_pk)
      .def_readwrite("t_fin", &TrajTiming::t_fin);

  py::class_<Config>(m, "Config")
      .def(py::init<>())
      .def_static("parse", &parse_config, py::arg("text"))
      .def_static("load", &load_config, py::arg("path"))
      .def("dump", [](const Config& c) { return dump_config(c); })
      .def("validate", &Config::validate)
      .def_readwrite("timing", &Config::timing)
      .def_readwrite("v_max", &Config::v_max)
      .def_readwrite("a_max", &Config::a_max)
      .def_readwrite("d_sense", &Config::d_sense)
      .def_readwrite("err_dv", &Config::err_dv)
      .def_readwrite("err_dt", &Config::err_dt)
      .def_readwrite("frs_dt", &Config::frs_dt)
      .def_readwrite("constant_error", &Config::constant_error)
      .def_readwrite("threads", &Config::threads)
      .def_property_readonly("mass", [](const Config& c) { return c.quad.mass; })
      .def_property_readonly("frs_hash", &Config::frs_hash)
      .def_property_readonly("table_hash", &Config::table_hash);

  m.def(
      "reference",
      [](double t, const Vec3& k_v, const Vec3& k_a, const Vec3& k_pk, const TrajTiming& timing) {
        const RefPoint r = ref_point_clamped(t, TrajParam::from_vectors(k_v, k_a, k_pk), timing);
        return py::make_tuple(r.pos, r.vel, r.acc);
      },
      py::arg("t"), py::arg("k_v"), py::arg("k_a"), py::arg("k_pk"), py::arg("timing") = TrajTiming{},
      "Reference (position, velocity, acceleration) of the trajectory model at t.");

  py::class_<TimedFRS>(m, "FRS")
      .def_property_readonly("num_steps", [](const TimedFRS& f) { return f.steps.size(); })
      .def_readonly("dt", &TimedFRS::dt)
      .def_readonly("config_hash", &TimedFRS::config_hash)
      .def("step_interval",
           [](const TimedFRS& f, std::size_t i) {
             const Interval& t = f.steps.at(i).t_interval;
             return py::make_tuple(t.lo, t.hi);
           })
      .def("save", [](const TimedFRS& f, const std::string& path) { save_frs(f, path); });

  m.def(
      "compute_frs", [](const Config& c) { return reach_3d(c.bounds, c.timing, c.frs_dt, c.frs_hash(), c.threads); },
      py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("load_frs", &load_frs, py::arg("path"));

  py::class_<TrackingErrorTable, std::shared_ptr<TrackingErrorTable>>(m, "ErrorTable")
      .def("query",
           [](const TrackingErrorTable& t, double time, const Vec3& k_v) {
             const ErrorBox b = t.query(time, k_v);
             return py::make_tuple(b.lo, b.hi);
           })
      .def_property_readonly("num_bins", [](const TrackingErrorTable& t) { return t.cover().num_bins(); })
      .def_property_readonly("num_cells", [](const TrackingErrorTable& t) { return t.cover().num_cells(); })
      .def("save", &TrackingErrorTable::save);

  m.def(
      "compute_error_table",
      [](const Config& c) {
        return std::make_shared<TrackingErrorTable>(
            compute_table(Cover(c.cover_spec()), c.quad, c.gains(), c.timing, c.table_options()));
      },
      py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "load_error_table", [](const std::string& p) { return std::make_shared<TrackingErrorTable>(TrackingErrorTable::load(p)); },
      py::arg("path"));

  py::class_<World>(m, "World")
      .def_readonly("start", &World::start)
      .def_readonly("goal", &World::goal)
      .def_readonly("seed", &World::seed)
      .def_property_readonly("bounds", [](const World& w) { return py::make_tuple(w.bounds.lo(), w.bounds.hi()); })
      .def_property_readonly("obstacles", [](const World& w) { return obstacles_array(w.obstacles); })
      .def("collides", [](const World& w, const Vec3& x) { return collision_check(x, w, Box3(Vec3::Zero(), Vec3::Constant(0.27))); });

  m.def(
      "generate_world", [](std::uint64_t seed, const Config& c) { return generate_world(seed, c.world, c.body()); },
      py::arg("seed"), py::arg("config") = Config{});

  m.def(
      "run_trial",
      [](const World& w, const TimedFRS& frs, const Config& c, std::shared_ptr<TrackingErrorTable> table, bool trace) {
        TrialConfig tc = c.trial();
        tc.record_trace = trace;
        TrialResult r;
        {
          py::gil_scoped_release release;
          r = table ? run_trial(w, ErrorMode::kTable, frs, table, tc) : run_trial(w, ErrorMode::kConstant, frs, nullptr, tc);
        }
        return trial_dict(r);
      },
      py::arg("world"), py::arg("frs"), py::arg("config") = Config{}, py::arg("table") = nullptr,
      py::arg("trace") = false, "Closed-loop trial; table mode when an error table is given.");

  m.def(
      "verify",
      [](const TimedFRS& frs, const Config& c, int samples, std::uint64_t seed) {
        std::vector<CheckResult> out;
        {
          py::gil_scoped_release release;
          out.push_back(check_frs_conservatism(frs, samples, seed));
          out.push_back(check_fail_safe(c, 10, seed + 1));
          out.push_back(check_endpoint_argmax(c, 10, seed + 2));
        }
        py::list l;
        for (const CheckResult& r : out) l.append(check_dict(r));
        return l;
      },
      py::arg("frs"), py::arg("config") = Config{}, py::arg("samples") = 10000, py::arg("seed") = 0,
      "Quick property checks: FRS containment, fail-safe stop and the endpoint argmax.");
}
