#include "stlmtl/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <thread>

#include <spdlog/spdlog.h>

namespace stlmtl {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int first_positive(const std::vector<double>& series) {
  for (std::size_t h = 0; h < series.size(); ++h)
    if (series[h] > 0.0) return static_cast<int>(h) + 1;
  return -1;
}

}  // namespace

StepMatrix StageSetup::cold_controls() const {
  if (cold_start.size() != 0) return cold_start;
  return StepMatrix::Zero(num_steps, sys.m());
}

std::vector<int> StageReport::iterations_to_positive() const {
  std::vector<int> out;
  out.reserve(runs.size());
  for (const auto& r : runs) out.push_back(r.iterations_to_positive);
  return out;
}

int StageReport::num_converged() const {
  return static_cast<int>(std::count_if(runs.begin(), runs.end(), [](const TaskRun& r) { return r.result.converged; }));
}

void summarize_histories(StageReport& report) {
  std::size_t len = 0;
  for (const auto& h : report.rd_history) len = std::max(len, h.size());
  for (auto& h : report.rd_history) {
    if (!h.empty()) h.resize(len, h.back());
  }
  report.avg_history.assign(len, 0.0);
  report.min_history.assign(len, std::numeric_limits<double>::infinity());
  report.max_history.assign(len, -std::numeric_limits<double>::infinity());
  std::size_t count = 0;
  for (const auto& h : report.rd_history) {
    if (h.empty()) continue;
    ++count;
    for (std::size_t k = 0; k < len; ++k) {
      report.avg_history[k] += h[k];
      report.min_history[k] = std::min(report.min_history[k], h[k]);
      report.max_history[k] = std::max(report.max_history[k], h[k]);
    }
  }
  if (count == 0) {
    report.avg_history.clear();
    report.min_history.clear();
    report.max_history.clear();
    return;
  }
  for (double& v : report.avg_history) v /= static_cast<double>(count);
}

LearningResult learning_stage(const StageSetup& setup, int num_tasks, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<Task> tasks =
      generate_tasks(num_tasks, setup.templates, setup.sys.var_names, setup.horizon(), seed);
  const Task base = base_task(setup.templates, setup.sys.var_names);

  const double w = 1.0 / num_tasks;
  std::vector<WeightedFormula> objective;
  std::vector<RobustnessProgram> monitors;
  for (const auto& t : tasks) {
    objective.push_back({w, t.formula()});
    monitors.emplace_back(t.formula(), setup.sys.dt, setup.num_steps, 0);
  }
  const StopRule stop{objective, {base.formula()}};

  StageReport report;
  report.rd_history.resize(tasks.size());
  auto observer = [&](int, const Trajectory& traj) {
    for (std::size_t i = 0; i < monitors.size(); ++i) report.rd_history[i].push_back(monitors[i].exact(traj.trace.states));
  };

  LearningResult out;
  out.scp = scp_run(setup.sys, setup.x0, objective, setup.cfg, setup.cold_controls(), stop, observer);
  spdlog::info("learning: {} after {} passes, average RD {:.6g}", to_string(out.scp.status), out.scp.iterations,
               out.scp.rho_exact);

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    TaskRun run;
    run.task = tasks[i];
    run.iterations_to_positive = first_positive(report.rd_history[i]);
    report.runs.push_back(std::move(run));
  }
  summarize_histories(report);
  out.u_learn = out.scp.trajectory.controls;
  out.x_learn = out.scp.trajectory;
  report.wall_seconds = seconds_since(t0);
  out.report = std::move(report);
  return out;
}

TaskRun solve_task(const StageSetup& setup, const Task& task, const StepMatrix& u_init) {
  TaskRun run;
  run.task = task;
  try {
    const Formula f = task.formula();
    run.result = scp_run(setup.sys, setup.x0, {{1.0, f}}, setup.cfg, u_init, StopRule::single(f));
    run.iterations_to_positive = run.result.converged ? run.result.iterations : -1;
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  return run;
}

StageReport testing_stage(const StageSetup& setup, int num_tasks, double sigma_level, const StepMatrix& u_init,
                          std::uint64_t seed, int workers) {
  if (u_init.rows() != setup.num_steps || u_init.cols() != setup.sys.m()) {
    throw std::invalid_argument("testing stage: initial controls must be N_T x m");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<Task> tasks = generate_tasks(num_tasks, setup.templates, setup.sys.var_names, setup.horizon(),
                                                 seed, SigmaPolicy{sigma_level});

  StageReport report;
  report.runs.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) report.runs[i] = solve_task(setup, tasks[i], u_init);
  };
  const int n_threads = std::clamp(workers, 1, static_cast<int>(tasks.size()));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(work);
  }

  for (const auto& run : report.runs) {
    if (!run.error.empty()) spdlog::warn("test task {}: {}", run.task.id, run.error);
    report.rd_history.push_back(run.result.rho_exact_history);
  }
  summarize_histories(report);
  report.wall_seconds = seconds_since(t0);
  return report;
}

}  // namespace stlmtl
