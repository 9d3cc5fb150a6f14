#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stlmtl/formula.hpp"

namespace stlmtl {

/// One perturbable number in a specification template.
struct TemplateParam {
  std::string name;
  double nominal = 0.0;
  double sigma = 0.0;  // learning-stage standard deviation
  std::optional<double> lower;  // clamp range; when absent the draw is left as is
  std::optional<double> upper;
  /// Testing-stage standard deviation. Empty means "use the stage's sigma level".
  std::optional<double> test_sigma;
};

/// A specification written in the formula DSL with `{name}` placeholders.
/// Each placeholder is replaced by the drawn value wrapped in parentheses,
/// except inside an interval `[...]` where the bare number is used.
struct SpecTemplate {
  std::string name;
  std::string pattern;
  std::vector<TemplateParam> params;

  /// Text of the spec with the given values substituted.
  std::string render(const std::map<std::string, double>& values) const;
  std::map<std::string, double> nominal_values() const;
  Formula instantiate(const std::map<std::string, double>& values, const std::vector<std::string>& var_names) const;
};

class TaskGenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Task {
  int id = 0;
  std::vector<Formula> specs;
  /// Drawn parameter values, one map per spec.
  std::vector<std::map<std::string, double>> draws;

  /// Conjunction of the specs.
  Formula formula() const { return Formula::conj(specs); }
};

/// Where the standard deviations come from.
struct SigmaPolicy {
  /// Empty: each parameter's learning sigma. Otherwise the testing stage at
  /// this level: parameters with a fixed `test_sigma` keep it, the rest use the level.
  std::optional<double> level;

  double sigma_for(const TemplateParam& p) const;
};

/// Horizon the drawn specs must fit into.
struct HorizonLimit {
  double dt = 1.0;
  int num_steps = 0;
};

/// Counter-based standard normal: a pure function of its key.
double keyed_normal(std::uint64_t seed, std::uint64_t task, std::uint64_t spec, const std::string& tag,
                    std::uint64_t attempt);

/// Draws `count` tasks from the templates. Every parameter of a spec is drawn
/// from N(nominal, sigma^2); the whole spec is redrawn when the result does not
/// parse, has a negative or reversed interval, or exceeds the horizon. Bounded
/// parameters are clamped.
std::vector<Task> generate_tasks(int count, const std::vector<SpecTemplate>& templates,
                                 const std::vector<std::string>& var_names, const HorizonLimit& horizon,
                                 std::uint64_t seed, const SigmaPolicy& sigmas = {});

/// The unperturbed task.
Task base_task(const std::vector<SpecTemplate>& templates, const std::vector<std::string>& var_names);

}  // namespace stlmtl
