#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stlmtl/pipeline.hpp"

namespace stlmtl {

/// Invalid or unreadable scenario file. Carries line/column when the error
/// comes from a formula inside it.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SystemSpec {
  std::string type;  // "mass_spring_damper", "quadrotor" or "linear"
  double mass = 1.0;
  double ks = 0.0;
  double damping = 0.0;
  LinearSystem sys;  // built
};

/// How cold starts are initialized.
struct ColdStart {
  std::string kind = "zero";  // or "lqr"
  Eigen::VectorXd reference;  // lqr target state
};

struct LearnStage {
  int tasks = 1;
  std::uint64_t seed = 0;
};

struct TestStage {
  int tasks = 1;
  std::vector<double> sigma_levels;
  std::uint64_t seed = 1;
};

struct ScenarioConfig {
  std::string name;
  SystemSpec system;
  Eigen::VectorXd x0;
  int horizon_steps = 0;
  std::vector<SpecTemplate> specs;
  ScpConfig solver;
  ColdStart cold_start;
  LearnStage learn;
  TestStage test;
  std::string output_dir = "out";

  StageSetup setup() const;
  /// Every field, defaults included.
  nlohmann::json to_json() const;
};

ScenarioConfig scenario_from_json(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::filesystem::path& path);

}  // namespace stlmtl
