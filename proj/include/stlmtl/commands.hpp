#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "stlmtl/scenario.hpp"

namespace stlmtl {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitSolverFailure = 3,
  kExitPartialFailure = 4,
};

struct CommandOptions {
  std::filesystem::path config;
  /// Replaces both stage seeds: learning uses it as is, testing uses seed + 1.
  std::optional<std::uint64_t> seed;
  int workers = 1;
  /// Controls file for warm starts. Defaults to <out>/learn/controls.csv.
  std::optional<std::filesystem::path> warm;
  bool cold = false;
  std::optional<std::filesystem::path> out;
};

/// Loads the scenario and applies command-line overrides. Throws ConfigError.
ScenarioConfig resolve_scenario(const CommandOptions& opts);

/// Solves the unperturbed task from a cold start.
/// Writes trajectory.csv, run.json and trajectory.svg.
int cmd_solve(const CommandOptions& opts);

/// Runs the learning stage. Writes learn/controls.csv, learn/trajectory.csv,
/// learn/report.json, learn/timing.json and learn/rd_history.svg.
int cmd_learn(const CommandOptions& opts);

/// Runs the testing stage at every configured sigma level. Writes
/// test/<sigma>/task_<i>.csv, test/summary.json, test/timing.json and
/// test/rd_vs_iter.svg.
int cmd_test(const CommandOptions& opts);

}  // namespace stlmtl
