#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stlmtl/dynamics.hpp"
#include "stlmtl/scp.hpp"
#include "stlmtl/tasks.hpp"

namespace stlmtl {

/// Everything a stage needs besides its own counts and seed.
struct StageSetup {
  LinearSystem sys;
  Eigen::VectorXd x0;
  int num_steps = 0;
  std::vector<SpecTemplate> templates;
  ScpConfig cfg;
  StepMatrix cold_start;  // empty means zero controls

  StepMatrix cold_controls() const;
  HorizonLimit horizon() const { return {sys.dt, num_steps}; }
};

struct TaskRun {
  Task task;
  ScpResult result;
  /// Loop pass at which the task's exact RD first became positive; -1 if never.
  int iterations_to_positive = -1;
  std::string error;  // nonempty when the run threw
};

struct StageReport {
  std::vector<TaskRun> runs;
  /// rd_history[i][h]: exact RD of task i at pass h + 1. Runs that stopped
  /// early are padded with their last value.
  std::vector<std::vector<double>> rd_history;
  std::vector<double> avg_history;
  std::vector<double> min_history;
  std::vector<double> max_history;
  double wall_seconds = 0.0;

  std::vector<int> iterations_to_positive() const;
  int num_converged() const;
};

struct LearningResult {
  StepMatrix u_learn;
  Trajectory x_learn;
  /// The single shared run. `report.runs` lists the tasks with their
  /// first-positive passes; their `result` fields stay empty.
  ScpResult scp;
  StageReport report;
};

/// Optimizes one shared trajectory for the average smooth RD of M_L generated
/// tasks, from the cold-start controls. Stops once the exact RD averaged over
/// the tasks is positive and the unperturbed task is satisfied.
LearningResult learning_stage(const StageSetup& setup, int num_tasks, std::uint64_t seed);

/// Solves each of M_T tasks drawn at `sigma_level` independently, starting
/// from `u_init`. Runs spread over `workers` threads; results are ordered by
/// task id.
StageReport testing_stage(const StageSetup& setup, int num_tasks, double sigma_level, const StepMatrix& u_init,
                          std::uint64_t seed, int workers = 1);

/// Testing-stage worker body for one task; exceptions are recorded in the result.
TaskRun solve_task(const StageSetup& setup, const Task& task, const StepMatrix& u_init);

/// Fills avg/min/max from rd_history.
void summarize_histories(StageReport& report);

}  // namespace stlmtl
