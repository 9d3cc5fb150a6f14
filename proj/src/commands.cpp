#include "stlmtl/commands.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "stlmtl/dsl.hpp"
#include "stlmtl/report.hpp"

namespace stlmtl {

namespace fs = std::filesystem;
using nlohmann::json;

ScenarioConfig resolve_scenario(const CommandOptions& opts) {
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(opts.config);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (opts.seed) {
    cfg.learn.seed = *opts.seed;
    cfg.test.seed = *opts.seed + 1;
  }
  if (opts.out) cfg.output_dir = opts.out->string();
  return cfg;
}

namespace {

std::vector<double> iota_from(std::size_t n, double start) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), start);
  return v;
}

std::vector<Panel> trajectory_panels(const ScenarioConfig& cfg, const Trajectory& traj) {
  const LinearSystem& sys = cfg.system.sys;
  const auto& x = traj.trace.states;
  const int N = traj.num_steps();
  std::vector<double> t(static_cast<std::size_t>(N + 1));
  for (int k = 0; k <= N; ++k) t[static_cast<std::size_t>(k)] = k * sys.dt;

  std::vector<Panel> panels;
  Panel states{"States", "t [s]", "value", {}, {}, false};
  for (int i = 0; i < sys.n(); ++i) {
    std::vector<double> y(x.rows());
    for (Eigen::Index k = 0; k < x.rows(); ++k) y[static_cast<std::size_t>(k)] = x(k, i);
    states.series.push_back({sys.var_names[static_cast<std::size_t>(i)], t, y});
  }
  panels.push_back(std::move(states));

  if (cfg.system.type == "quadrotor") {
    // Position projections onto the three coordinate planes.
    const int pairs[3][2] = {{3, 4}, {3, 5}, {4, 5}};
    for (const auto& pr : pairs) {
      std::vector<double> a(x.rows()), b(x.rows());
      for (Eigen::Index k = 0; k < x.rows(); ++k) {
        a[static_cast<std::size_t>(k)] = x(k, pr[0]);
        b[static_cast<std::size_t>(k)] = x(k, pr[1]);
      }
      const std::string xa = sys.var_names[static_cast<std::size_t>(pr[0])];
      const std::string xb = sys.var_names[static_cast<std::size_t>(pr[1])];
      panels.push_back({"Path " + xa + "-" + xb, xa, xb, {{"path", a, b}}, {}, false});
    }
  }

  Panel controls{"Controls", "t [s]", "value", {}, {}, false};
  const std::vector<double> tu(t.begin(), t.end() - 1);
  for (int i = 0; i < sys.m(); ++i) {
    std::vector<double> y(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) y[static_cast<std::size_t>(k)] = traj.controls(k, i);
    controls.series.push_back({sys.u_names[static_cast<std::size_t>(i)], tu, y});
  }
  panels.push_back(std::move(controls));
  return panels;
}

json task_json(const Task& task, const std::vector<std::string>& names) {
  json j;
  j["id"] = task.id;
  json specs = json::array();
  for (const auto& f : task.specs) specs.push_back(pretty_print(f, names));
  j["specs"] = specs;
  j["draws"] = task.draws;
  return j;
}

fs::path out_dir(const ScenarioConfig& cfg) { return fs::path(cfg.output_dir); }

template <typename F>
int guarded(const char* what, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    spdlog::error("{}: {}", what, e.what());
    return kExitConfigError;
  } catch (const TaskGenerationError& e) {
    spdlog::error("{}: {}", what, e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    spdlog::error("{}: {}", what, e.what());
    return kExitSolverFailure;
  }
}

}  // namespace

int cmd_solve(const CommandOptions& opts) {
  return guarded("solve", [&] {
    const ScenarioConfig cfg = resolve_scenario(opts);
    const StageSetup setup = cfg.setup();
    const Task base = base_task(cfg.specs, cfg.system.sys.var_names);
    const Formula f = base.formula();

    const ScpResult res = scp_run(setup.sys, setup.x0, {{1.0, f}}, setup.cfg, setup.cold_controls(), StopRule::single(f));
    spdlog::info("solve: {} after {} passes, RD {:.6g}", to_string(res.status), res.iterations, res.rho_exact);

    const fs::path dir = out_dir(cfg);
    write_trajectory_csv(dir / "trajectory.csv", res.trajectory, cfg.system.sys);
    json run;
    run["config"] = cfg.to_json();
    run["task"] = pretty_print(f, cfg.system.sys.var_names);
    run["result"] = scp_result_json(res);
    run["boolean_sat"] = boolean_sat(f, res.trajectory.trace);
    write_json(dir / "run.json", run);
    write_svg(dir / "trajectory.svg", trajectory_panels(cfg, res.trajectory));
    return res.converged ? kExitOk : kExitSolverFailure;
  });
}

int cmd_learn(const CommandOptions& opts) {
  return guarded("learn", [&] {
    const ScenarioConfig cfg = resolve_scenario(opts);
    const StageSetup setup = cfg.setup();
    const LearningResult lr = learning_stage(setup, cfg.learn.tasks, cfg.learn.seed);
    const auto& names = cfg.system.sys.var_names;

    const fs::path dir = out_dir(cfg) / "learn";
    write_controls_csv(dir / "controls.csv", lr.u_learn, cfg.system.sys.u_names);
    write_trajectory_csv(dir / "trajectory.csv", lr.x_learn, cfg.system.sys);

    json report;
    report["config"] = cfg.to_json();
    json tasks = json::array();
    int satisfied = 0;
    for (std::size_t i = 0; i < lr.report.runs.size(); ++i) {
      const auto& run = lr.report.runs[i];
      json tj = task_json(run.task, names);
      tj["iterations_to_positive"] = run.iterations_to_positive;
      const bool sat = boolean_sat(run.task.formula(), lr.x_learn.trace);
      satisfied += sat ? 1 : 0;
      tj["satisfied"] = sat;
      tj["rd_history"] = lr.report.rd_history[i];
      tasks.push_back(tj);
    }
    report["tasks"] = tasks;
    report["avg_rd_history"] = lr.report.avg_history;
    report["min_rd_history"] = lr.report.min_history;
    report["max_rd_history"] = lr.report.max_history;
    report["satisfied_fraction"] = static_cast<double>(satisfied) / static_cast<double>(lr.report.runs.size());
    report["result"] = scp_result_json(lr.scp);
    write_json(dir / "report.json", report);
    write_json(dir / "timing.json", {{"wall_seconds", lr.report.wall_seconds}});

    const auto it = iota_from(lr.report.avg_history.size(), 1.0);
    Panel p{"Learning stage: exact RD across tasks", "SCP iteration", "RD", {}, {}, true};
    p.series = {{"max", it, lr.report.max_history}, {"average", it, lr.report.avg_history},
                {"min", it, lr.report.min_history}};
    write_svg(dir / "rd_history.svg", {p, trajectory_panels(cfg, lr.x_learn).front()});
    return lr.scp.converged ? kExitOk : kExitSolverFailure;
  });
}

namespace {

json iteration_stats(const std::vector<double>& v) {
  json j;
  if (v.empty()) return j;
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  double var = 0.0;
  for (double x : s) var += (x - mean) * (x - mean);
  const std::size_t n = s.size();
  j["mean"] = mean;
  j["median"] = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  j["std"] = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
  j["min"] = s.front();
  j["max"] = s.back();
  return j;
}

}  // namespace

int cmd_test(const CommandOptions& opts) {
  return guarded("test", [&] {
    const ScenarioConfig cfg = resolve_scenario(opts);
    const StageSetup setup = cfg.setup();
    if (cfg.test.sigma_levels.empty()) throw ConfigError("stages.test.sigma_levels is empty");

    StepMatrix u_init;
    std::string mode;
    if (opts.cold) {
      u_init = setup.cold_controls();
      mode = "cold";
    } else {
      const fs::path warm = opts.warm ? *opts.warm : out_dir(cfg) / "learn" / "controls.csv";
      if (!fs::exists(warm)) throw ConfigError("warm-start file '" + warm.string() + "' not found");
      try {
        u_init = read_controls_csv(warm);
      } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
      }
      if (u_init.rows() != setup.num_steps || u_init.cols() != setup.sys.m()) {
        throw ConfigError("warm-start file has " + std::to_string(u_init.rows()) + "x" + std::to_string(u_init.cols()) +
                          " controls, expected " + std::to_string(setup.num_steps) + "x" + std::to_string(setup.sys.m()));
      }
      mode = "warm";
    }

    const fs::path dir = out_dir(cfg) / "test";
    const auto& names = cfg.system.sys.var_names;
    json summary;
    summary["config"] = cfg.to_json();
    summary["mode"] = mode;
    json levels = json::array();
    json timing = json::array();
    std::vector<Panel> panels;
    bool all_ok = true;

    for (double sigma : cfg.test.sigma_levels) {
      const StageReport rep = testing_stage(setup, cfg.test.tasks, sigma, u_init, cfg.test.seed, opts.workers);
      const std::string tag = format_number(sigma);
      json lj;
      lj["sigma"] = sigma;
      json tasks = json::array();
      std::vector<double> iters, iters_pos;
      for (const auto& run : rep.runs) {
        json tj = task_json(run.task, names);
        tj["converged"] = run.result.converged;
        tj["status"] = run.error.empty() ? to_string(run.result.status) : "error";
        tj["iterations"] = run.result.iterations;
        tj["iterations_to_positive"] = run.iterations_to_positive;
        tj["accepted_steps"] = run.result.accepted_steps;
        tj["rho_exact"] = run.result.rho_exact;
        tj["rd_history"] = run.result.rho_exact_history;
        tj["radius_history"] = run.result.radius_history;
        if (!run.error.empty()) tj["error"] = run.error;
        tasks.push_back(tj);
        iters.push_back(run.result.iterations);
        if (run.result.converged) iters_pos.push_back(run.iterations_to_positive);
        if (!run.result.converged) all_ok = false;
        if (run.error.empty()) {
          write_trajectory_csv(dir / tag / ("task_" + std::to_string(run.task.id) + ".csv"), run.result.trajectory,
                               cfg.system.sys);
        }
      }
      lj["tasks"] = tasks;
      lj["converged"] = rep.num_converged();
      lj["iterations"] = iteration_stats(iters);
      lj["iterations_to_positive"] = iteration_stats(iters_pos);
      lj["avg_rd_history"] = rep.avg_history;
      lj["min_rd_history"] = rep.min_history;
      lj["max_rd_history"] = rep.max_history;
      levels.push_back(lj);
      timing.push_back({{"sigma", sigma}, {"wall_seconds", rep.wall_seconds}});
      spdlog::info("test sigma {}: {}/{} converged, mean passes {:.3g}", tag, rep.num_converged(), rep.runs.size(),
                   lj["iterations"].value("mean", 0.0));

      const auto it = iota_from(rep.avg_history.size(), 1.0);
      Panel p{"Testing stage (" + mode + "), sigma " + tag, "SCP iteration", "RD", {}, {}, true};
      p.series = {{"average", it, rep.avg_history}};
      p.bands = {{it, rep.min_history, rep.max_history}};
      panels.push_back(std::move(p));
    }
    summary["levels"] = levels;
    write_json(dir / "summary.json", summary);
    write_json(dir / "timing.json", {{"mode", mode}, {"levels", timing}});
    write_svg(dir / "rd_vs_iter.svg", panels);
    return all_ok ? kExitOk : kExitPartialFailure;
  });
}

}  // namespace stlmtl
