#include "stlmtl/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stlmtl/dsl.hpp"

namespace stlmtl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// 53-bit uniform in (0, 1].
double to_unit(std::uint64_t h) { return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53; }

}  // namespace

double keyed_normal(std::uint64_t seed, std::uint64_t task, std::uint64_t spec, const std::string& tag,
                    std::uint64_t attempt) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t part : {task, spec, fnv1a(tag), attempt}) h = splitmix64(h ^ part);
  const double u1 = to_unit(splitmix64(h ^ 1));
  const double u2 = to_unit(splitmix64(h ^ 2));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double SigmaPolicy::sigma_for(const TemplateParam& p) const {
  if (!level) return p.sigma;
  return p.test_sigma ? *p.test_sigma : *level;
}

std::string SpecTemplate::render(const std::map<std::string, double>& values) const {
  std::string out;
  out.reserve(pattern.size() + 16);
  int bracket_depth = 0;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const char c = pattern[i];
    if (c == '[') ++bracket_depth;
    if (c == ']') --bracket_depth;
    if (c != '{') {
      out += c;
      continue;
    }
    const std::size_t close = pattern.find('}', i);
    if (close == std::string::npos) throw TaskGenerationError("template '" + name + "': unterminated placeholder");
    const std::string key = pattern.substr(i + 1, close - i - 1);
    const auto it = values.find(key);
    if (it == values.end()) throw TaskGenerationError("template '" + name + "': no value for '" + key + "'");
    out += bracket_depth > 0 ? format_number(it->second) : "(" + format_number(it->second) + ")";
    i = close;
  }
  return out;
}

std::map<std::string, double> SpecTemplate::nominal_values() const {
  std::map<std::string, double> v;
  for (const auto& p : params) v[p.name] = p.nominal;
  return v;
}

Formula SpecTemplate::instantiate(const std::map<std::string, double>& values,
                                  const std::vector<std::string>& var_names) const {
  return parse(render(values), var_names);
}

namespace {

bool fits(const Formula& f, const HorizonLimit& horizon) {
  return formula_horizon(f) <= horizon.num_steps * horizon.dt * (1.0 + 1e-12);
}

}  // namespace

std::vector<Task> generate_tasks(int count, const std::vector<SpecTemplate>& templates,
                                 const std::vector<std::string>& var_names, const HorizonLimit& horizon,
                                 std::uint64_t seed, const SigmaPolicy& sigmas) {
  if (count < 1) throw TaskGenerationError("task count must be >= 1");
  if (templates.empty()) throw TaskGenerationError("need at least one specification template");
  constexpr int kMaxAttempts = 100;

  std::vector<Task> tasks(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) {
    Task& task = tasks[static_cast<std::size_t>(t)];
    task.id = t;
    for (std::size_t s = 0; s < templates.size(); ++s) {
      const SpecTemplate& tpl = templates[s];
      bool done = false;
      for (int attempt = 0; attempt < kMaxAttempts && !done; ++attempt) {
        std::map<std::string, double> values;
        for (const auto& p : tpl.params) {
          double v = p.nominal + sigmas.sigma_for(p) * keyed_normal(seed, static_cast<std::uint64_t>(t), s, p.name,
                                                                    static_cast<std::uint64_t>(attempt));
          if (p.lower) v = std::max(v, *p.lower);
          if (p.upper) v = std::min(v, *p.upper);
          values[p.name] = v;
        }
        try {
          Formula f = tpl.instantiate(values, var_names);
          if (!fits(f, horizon)) continue;
          task.specs.push_back(std::move(f));
          task.draws.push_back(std::move(values));
          done = true;
        } catch (const ParseError&) {
        } catch (const std::invalid_argument&) {
        }
      }
      if (!done) {
        throw TaskGenerationError("template '" + tpl.name + "': no valid draw after " + std::to_string(kMaxAttempts) +
                                  " attempts");
      }
    }
  }
  return tasks;
}

Task base_task(const std::vector<SpecTemplate>& templates, const std::vector<std::string>& var_names) {
  Task task;
  for (const auto& tpl : templates) {
    auto values = tpl.nominal_values();
    task.specs.push_back(tpl.instantiate(values, var_names));
    task.draws.push_back(std::move(values));
  }
  return task;
}

}  // namespace stlmtl
