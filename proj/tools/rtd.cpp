// rtd: offline artifact builder, trial runner and property checker.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "rtd/artifact.hpp"
#include "rtd/config.hpp"
#include "rtd/frs.hpp"
#include "rtd/tracking_error.hpp"
#include "rtd/verify.hpp"
#include "rtd/world_bench.hpp"

namespace {

using namespace rtd;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

Config config_from(const std::string& path) { return path.empty() ? Config{} : load_config(path); }

// "a..b" (inclusive) or a comma-separated list.
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  const auto dots = s.find("..");
  if (dots != std::string::npos) {
    const std::uint64_t a = std::stoull(s.substr(0, dots)), b = std::stoull(s.substr(dots + 2));
    if (b < a) throw CLI::ValidationError("--seeds", "empty range " + s);
    for (std::uint64_t i = a; i <= b; ++i) out.push_back(i);
    return out;
  }
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    out.push_back(std::stoull(s.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

TimedFRS load_checked_frs(const std::string& path, const Config& cfg, bool force) {
  if (path.empty()) throw ArtifactError("no FRS file given (--frs)");
  TimedFRS frs = load_frs(path);
  check_config_hash("FRS '" + path + "'", cfg.frs_hash(), frs.config_hash, force);
  check_frs_compatible(frs, cfg.timing, cfg.bounds);
  return frs;
}

std::shared_ptr<const TrackingErrorTable> load_checked_table(const std::string& path, const Config& cfg,
                                                             bool force) {
  if (path.empty()) throw ArtifactError("no error table given (--table)");
  auto table = std::make_shared<const TrackingErrorTable>(TrackingErrorTable::load(path));
  check_config_hash("error table '" + path + "'", cfg.table_hash(), table->metadata().config_hash, force);
  if (!(table->timing().t_fin == cfg.timing.t_fin && table->timing().t_pk == cfg.timing.t_pk))
    throw ArtifactError("error table '" + path + "' was built for different timing");
  return table;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream os(path);
  if (!os) throw ArtifactError("cannot write '" + path + "'");
  os << j.dump(2) << '\n';
}

void print_check(const CheckResult& r) {
  std::printf("[%s] %-30s %s (%.2f s)\n", r.pass ? "PASS" : (r.soft ? "SOFT" : "FAIL"), r.name.c_str(),
              r.detail.c_str(), r.seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reachability-based trajectory design for a quadrotor"};
  app.require_subcommand(1);

  std::string config_path, out_path, frs_path, table_path, trace_path, mode = "table", seeds = "0..49";
  std::uint64_t seed = 0;
  bool force = false, quick = false, debug = false;
  int threads = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file (defaults when omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("--threads", threads, "worker threads (0 = all cores)");
  };
  auto add_artifacts = [&](CLI::App* sub) {
    sub->add_option("--frs", frs_path, "FRS file from compute-frs");
    sub->add_option("--table", table_path, "error table from compute-error-table");
    sub->add_flag("--force", force, "accept artifacts built with a different config hash");
  };

  auto* c_table = app.add_subcommand("compute-error-table", "sample the closed loop and build the error table");
  add_common(c_table);
  c_table->add_option("--out", out_path, "output table path (a .json sidecar is written next to it)")->required();

  auto* c_frs = app.add_subcommand("compute-frs", "compute the zonotope FRS of the trajectory model");
  add_common(c_frs);
  c_frs->add_option("--out", out_path, "output FRS path")->required();

  auto* c_trial = app.add_subcommand("run-trial", "run one receding-horizon trial in a random world");
  add_common(c_trial);
  add_artifacts(c_trial);
  c_trial->add_option("--seed", seed, "world seed");
  c_trial->add_option("--mode", mode, "error model: table or constant")->check(CLI::IsMember({"table", "constant"}));
  c_trial->add_option("--trace", trace_path, "CSV trace of executed/reference trajectory and FRS slices");
  c_trial->add_option("--out", out_path, "JSON result (stdout when omitted)");
  c_trial->add_flag("--debug", debug, "print per-iteration planner diagnostics");

  auto* c_bench = app.add_subcommand("benchmark", "run trials over many seeded worlds");
  add_common(c_bench);
  add_artifacts(c_bench);
  c_bench->add_option("--seeds", seeds, "seed range a..b (inclusive) or list a,b,c");
  c_bench->add_option("--mode", mode, "table, constant or both")
      ->check(CLI::IsMember({"table", "constant", "both"}));
  c_bench->add_option("--out", out_path, "JSON report (stdout when omitted)");

  auto* c_inspect = app.add_subcommand("inspect-table", "dump per-cell error maxima as CSV");
  c_inspect->add_option("--table", table_path, "error table")->required();
  c_inspect->add_option("--out", out_path, "CSV path (stdout when omitted)");

  auto* c_verify = app.add_subcommand("verify", "run the oracle property suites");
  add_common(c_verify);
  add_artifacts(c_verify);
  c_verify->add_flag("--quick", quick, "smaller sample counts");
  c_verify->add_option("--seed", seed, "base seed for random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    Config cfg = config_from(config_path);
    if (threads >= 0) cfg.threads = threads;
    const auto nthreads = static_cast<unsigned>(cfg.threads);

    if (c_table->parsed()) {
      const Cover cover(cfg.cover_spec());
      std::fprintf(stderr, "building error table: %d bins x %d cells\n", cover.num_bins(), cover.num_cells());
      const auto table = compute_table(cover, cfg.quad, cfg.gains(), cfg.timing, cfg.table_options());
      table.save(out_path);
      std::fprintf(stderr, "%zu simulations in %.1f s, max |e_x| = %.4f m -> %s\n",
                   table.metadata().num_simulations, table.metadata().build_seconds,
                   table.metadata().max_raw_error, out_path.c_str());
      return kOk;
    }

    if (c_frs->parsed()) {
      const TimedFRS frs = reach_3d(cfg.bounds, cfg.timing, cfg.frs_dt, cfg.frs_hash(), nthreads);
      save_frs(frs, out_path);
      std::fprintf(stderr, "%zu FRS steps -> %s\n", frs.steps.size(), out_path.c_str());
      return kOk;
    }

    if (c_trial->parsed()) {
      const TimedFRS frs = load_checked_frs(frs_path, cfg, force);
      const ErrorMode m = parse_error_mode(mode);
      std::shared_ptr<const TrackingErrorTable> table;
      if (m == ErrorMode::kTable) table = load_checked_table(table_path, cfg, force);
      TrialConfig tc = cfg.trial();
      tc.record_trace = !trace_path.empty();
      tc.planner.debug = debug;
      const World world = generate_world(seed, cfg.world, cfg.body());
      const TrialResult r = run_trial(world, m, frs, table, tc);
      if (!trace_path.empty()) {
        std::ofstream os(trace_path);
        if (!os) throw ArtifactError("cannot write '" + trace_path + "'");
        write_trace_csv(os, r);
      }
      write_json(out_path, trial_json(r));
      return r.outcome == Outcome::kCrash ? kFailure : kOk;
    }

    if (c_bench->parsed()) {
      const auto seed_list = parse_seeds(seeds);
      const TimedFRS frs = load_checked_frs(frs_path, cfg, force);
      std::shared_ptr<const TrackingErrorTable> table;
      if (mode != "constant") table = load_checked_table(table_path, cfg, force);
      std::vector<BenchmarkReport> reports;
      for (const char* m : {"constant", "table"}) {
        if (mode != "both" && mode != m) continue;
        reports.push_back(run_benchmark(seed_list, parse_error_mode(m), frs, table, cfg.trial(), cfg.world, nthreads));
        const auto& r = reports.back();
        std::fprintf(stderr, "%-8s trials=%zu goal_rate=%.3f crash_rate=%.3f\n", m, r.trials.size(), r.goal_rate,
                     r.crash_rate);
      }
      nlohmann::json out;
      if (reports.size() == 1) {
        out = report_json(reports.front());
      } else {
        out = {{"modes", nlohmann::json::array()}};
        for (const auto& r : reports) out["modes"].push_back(report_json(r));
      }
      write_json(out_path, out);
      bool crashed = false;
      for (const auto& r : reports) crashed |= r.count(Outcome::kCrash) > 0;
      return crashed ? kFailure : kOk;
    }

    if (c_inspect->parsed()) {
      const auto table = TrackingErrorTable::load(table_path);
      std::ofstream file;
      if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw ArtifactError("cannot write '" + out_path + "'");
      }
      std::ostream& os = out_path.empty() ? std::cout : file;
      const Cover& cover = table.cover();
      os << "cell,v1,v2,v3,max_e1,max_e2,max_e3,max_abs\n";
      for (int c = 0; c < cover.num_cells(); ++c) {
        Vec3 m = Vec3::Zero();
        for (int j = 0; j < cover.num_bins(); ++j) {
          const ErrorBox& b = table.at(j, c);
          m = m.cwiseMax(b.lo.cwiseAbs()).cwiseMax(b.hi.cwiseAbs());
        }
        const Vec3 v = cover.cell_box(c).center;
        os << c << ',' << v[0] << ',' << v[1] << ',' << v[2] << ',' << m[0] << ',' << m[1] << ',' << m[2] << ','
           << m.maxCoeff() << '\n';
      }
      return kOk;
    }

    if (c_verify->parsed()) {
      const TimedFRS frs = frs_path.empty() ? reach_3d(cfg.bounds, cfg.timing, cfg.frs_dt, cfg.frs_hash(), nthreads)
                                            : load_checked_frs(frs_path, cfg, force);
      const int scale = quick ? 10 : 1;
      std::vector<CheckResult> results;
      results.push_back(check_frs_conservatism(frs, 100000 / scale, seed + 1));
      results.push_back(check_unsafe_boxes(frs, quick ? 10 : 50, 0.05, seed + 2));
      results.push_back(check_constraints(200 / scale, 500, seed + 3));
      results.push_back(check_fail_safe(cfg, 100 / scale, seed + 4));
      results.push_back(check_integrators(cfg, 100 / scale, 0.005, seed + 5));
      results.push_back(check_endpoint_argmax(cfg, 100 / scale, seed + 6));
      if (!table_path.empty()) results.push_back(check_table_replay(*load_checked_table(table_path, cfg, force), cfg, 0.12));
      results.push_back(check_cover_cardinality());
      bool ok = true;
      for (const auto& r : results) {
        print_check(r);
        ok &= r.pass || r.soft;
      }
      return ok ? kOk : kFailure;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rtd: error: %s\n", e.what());
    return kFailure;
  }
  return kUsage;
}
