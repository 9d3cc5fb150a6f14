#include "stlmtl/scenario.hpp"

#include <fstream>
#include <set>

#include "stlmtl/dsl.hpp"

namespace stlmtl {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw ConfigError(where + ": " + what); }

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

template <typename T>
T get(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) fail(where, std::string("missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where + "." + key, "wrong type");
  }
}

template <typename T>
T get_or(const json& j, const std::string& where, const char* key, T fallback) {
  return j.contains(key) ? get<T>(j, where, key) : fallback;
}

Eigen::VectorXd to_vector(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(where, "expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd to_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) fail(where, "expected a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = to_vector(j[static_cast<std::size_t>(r)], where);
    if (row.size() != cols) fail(where, "ragged matrix");
    M.row(r) = row.transpose();
  }
  return M;
}

json from_vector(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json from_matrix(const Eigen::MatrixXd& M) {
  json a = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) a.push_back(from_vector(M.row(r).transpose()));
  return a;
}

SystemSpec read_system(const json& j) {
  const std::string where = "system";
  SystemSpec s;
  s.type = get<std::string>(j, where, "type");
  if (s.type == "mass_spring_damper") {
    check_keys(j, where, {"type", "mass", "ks", "damping", "dt"});
    s.mass = get<double>(j, where, "mass");
    s.ks = get<double>(j, where, "ks");
    s.damping = get<double>(j, where, "damping");
    s.sys = mass_spring_damper(s.mass, s.ks, s.damping, get<double>(j, where, "dt"));
  } else if (s.type == "quadrotor") {
    check_keys(j, where, {"type"});
    s.sys = quadrotor();
  } else if (s.type == "linear") {
    check_keys(j, where, {"type", "A", "B", "dt", "state_names", "input_names"});
    s.sys.A = to_matrix(get<json>(j, where, "A"), where + ".A");
    s.sys.B = to_matrix(get<json>(j, where, "B"), where + ".B");
    s.sys.dt = get<double>(j, where, "dt");
    s.sys.var_names = get<std::vector<std::string>>(j, where, "state_names");
    s.sys.u_names = get<std::vector<std::string>>(j, where, "input_names");
  } else {
    fail(where, "unknown type '" + s.type + "'");
  }
  try {
    s.sys.validate();
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
  return s;
}

SpecTemplate read_spec(const json& j, std::size_t index) {
  const std::string where = "specs[" + std::to_string(index) + "]";
  check_keys(j, where, {"name", "pattern", "params"});
  SpecTemplate t;
  t.name = get_or<std::string>(j, where, "name", "spec" + std::to_string(index));
  t.pattern = get<std::string>(j, where, "pattern");
  if (j.contains("params")) {
    const json& params = j.at("params");
    if (!params.is_object()) fail(where + ".params", "expected an object");
    for (const auto& [name, pj] : params.items()) {
      const std::string pw = where + ".params." + name;
      check_keys(pj, pw, {"nominal", "sigma", "lower", "upper", "test_sigma"});
      TemplateParam p;
      p.name = name;
      p.nominal = get<double>(pj, pw, "nominal");
      p.sigma = get_or<double>(pj, pw, "sigma", 0.0);
      if (pj.contains("lower")) p.lower = get<double>(pj, pw, "lower");
      if (pj.contains("upper")) p.upper = get<double>(pj, pw, "upper");
      if (pj.contains("test_sigma")) {
        const json& ts = pj.at("test_sigma");
        if (ts.is_string()) {
          if (ts.get<std::string>() != "level") fail(pw + ".test_sigma", "expected a number or \"level\"");
        } else {
          p.test_sigma = get<double>(pj, pw, "test_sigma");
        }
      }
      if (p.sigma < 0.0 || (p.test_sigma && *p.test_sigma < 0.0)) fail(pw, "standard deviations must be >= 0");
      if (p.lower && p.upper && *p.lower > *p.upper) fail(pw, "lower exceeds upper");
      t.params.push_back(std::move(p));
    }
  }
  return t;
}

ScpConfig read_solver(const json& j, int n, int m) {
  const std::string where = "solver";
  check_keys(j, where,
             {"max_iterations", "K", "alpha", "Q", "R", "r0", "r_min", "r_max", "shrink", "grow", "eta_accept",
              "eta_good", "u_lower", "u_upper", "linearization", "tol_kkt", "stall_limit"});
  ScpConfig c;
  c.max_iterations = get_or(j, where, "max_iterations", c.max_iterations);
  c.K = get_or(j, where, "K", c.K);
  c.alpha = get_or(j, where, "alpha", c.alpha);
  if (j.contains("Q")) c.Q = to_matrix(j.at("Q"), where + ".Q");
  if (j.contains("R")) c.R = to_matrix(j.at("R"), where + ".R");
  c.r0 = get_or(j, where, "r0", c.r0);
  c.r_min = get_or(j, where, "r_min", c.r_min);
  c.r_max = get_or(j, where, "r_max", c.r_max);
  c.shrink = get_or(j, where, "shrink", c.shrink);
  c.grow = get_or(j, where, "grow", c.grow);
  c.eta_accept = get_or(j, where, "eta_accept", c.eta_accept);
  c.eta_good = get_or(j, where, "eta_good", c.eta_good);
  if (j.contains("u_lower")) c.u_lower = to_vector(j.at("u_lower"), where + ".u_lower");
  if (j.contains("u_upper")) c.u_upper = to_vector(j.at("u_upper"), where + ".u_upper");
  if (j.contains("linearization")) {
    try {
      c.linearization = linearization_from_string(get<std::string>(j, where, "linearization"));
    } catch (const std::invalid_argument& e) {
      fail(where, e.what());
    }
  }
  c.tol_kkt = get_or(j, where, "tol_kkt", c.tol_kkt);
  c.stall_limit = get_or(j, where, "stall_limit", c.stall_limit);
  try {
    c.resolve(n, m);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

}  // namespace

StageSetup ScenarioConfig::setup() const {
  StageSetup s;
  s.sys = system.sys;
  s.x0 = x0;
  s.num_steps = horizon_steps;
  s.templates = specs;
  s.cfg = solver;
  if (cold_start.kind == "lqr") {
    s.cold_start = lqr_tracking_controls(system.sys, x0, horizon_steps, cold_start.reference, solver.Q, solver.R);
  }
  return s;
}

json ScenarioConfig::to_json() const {
  json j;
  j["name"] = name;
  json sj;
  sj["type"] = system.type;
  if (system.type == "mass_spring_damper") {
    sj["mass"] = system.mass;
    sj["ks"] = system.ks;
    sj["damping"] = system.damping;
    sj["dt"] = system.sys.dt;
  } else if (system.type == "linear") {
    sj["A"] = from_matrix(system.sys.A);
    sj["B"] = from_matrix(system.sys.B);
    sj["dt"] = system.sys.dt;
    sj["state_names"] = system.sys.var_names;
    sj["input_names"] = system.sys.u_names;
  }
  j["system"] = sj;
  j["x0"] = from_vector(x0);
  j["horizon_steps"] = horizon_steps;

  json specs_j = json::array();
  for (const auto& t : specs) {
    json tj;
    tj["name"] = t.name;
    tj["pattern"] = t.pattern;
    json pj = json::object();
    for (const auto& p : t.params) {
      json q;
      q["nominal"] = p.nominal;
      q["sigma"] = p.sigma;
      if (p.lower) q["lower"] = *p.lower;
      if (p.upper) q["upper"] = *p.upper;
      if (p.test_sigma) q["test_sigma"] = *p.test_sigma;
      pj[p.name] = q;
    }
    tj["params"] = pj;
    specs_j.push_back(tj);
  }
  j["specs"] = specs_j;

  json sv;
  sv["max_iterations"] = solver.max_iterations;
  sv["K"] = solver.K;
  sv["alpha"] = solver.alpha;
  sv["Q"] = from_matrix(solver.Q);
  sv["R"] = from_matrix(solver.R);
  sv["r0"] = solver.r0;
  sv["r_min"] = solver.r_min;
  sv["r_max"] = solver.r_max;
  sv["shrink"] = solver.shrink;
  sv["grow"] = solver.grow;
  sv["eta_accept"] = solver.eta_accept;
  sv["eta_good"] = solver.eta_good;
  if (solver.u_lower) sv["u_lower"] = from_vector(*solver.u_lower);
  if (solver.u_upper) sv["u_upper"] = from_vector(*solver.u_upper);
  sv["linearization"] = to_string(solver.linearization);
  sv["tol_kkt"] = solver.tol_kkt;
  sv["stall_limit"] = solver.stall_limit;
  j["solver"] = sv;

  json cs;
  cs["kind"] = cold_start.kind;
  if (cold_start.kind == "lqr") cs["reference"] = from_vector(cold_start.reference);
  j["cold_start"] = cs;
  j["stages"] = {{"learn", {{"tasks", learn.tasks}, {"seed", learn.seed}}},
                 {"test", {{"tasks", test.tasks}, {"sigma_levels", test.sigma_levels}, {"seed", test.seed}}}};
  j["output_dir"] = output_dir;

  // Derived values, for readers of the artifacts. Ignored on load.
  json base = json::array();
  for (const auto& t : specs)
    base.push_back(pretty_print(t.instantiate(t.nominal_values(), system.sys.var_names), system.sys.var_names));
  j["resolved"] = {{"A", from_matrix(system.sys.A)},
                   {"B", from_matrix(system.sys.B)},
                   {"dt", system.sys.dt},
                   {"state_names", system.sys.var_names},
                   {"input_names", system.sys.u_names},
                   {"base_task", base}};
  return j;
}

ScenarioConfig scenario_from_json(const json& j) {
  check_keys(j, "scenario",
             {"name", "system", "x0", "horizon_steps", "specs", "solver", "cold_start", "stages", "output_dir", "resolved"});
  ScenarioConfig c;
  c.name = get_or<std::string>(j, "scenario", "name", "scenario");
  c.system = read_system(get<json>(j, "scenario", "system"));
  const int n = c.system.sys.n();
  const int m = c.system.sys.m();
  c.x0 = to_vector(get<json>(j, "scenario", "x0"), "x0");
  if (c.x0.size() != n) fail("x0", "expected " + std::to_string(n) + " entries");
  c.horizon_steps = get<int>(j, "scenario", "horizon_steps");
  if (c.horizon_steps < 1) fail("horizon_steps", "must be >= 1");

  const json specs = get<json>(j, "scenario", "specs");
  if (!specs.is_array() || specs.empty()) fail("specs", "expected a nonempty array");
  for (std::size_t i = 0; i < specs.size(); ++i) c.specs.push_back(read_spec(specs[i], i));

  // The base task must parse and fit the horizon.
  const double horizon_s = c.horizon_steps * c.system.sys.dt;
  for (const auto& t : c.specs) {
    try {
      const Formula f = t.instantiate(t.nominal_values(), c.system.sys.var_names);
      if (formula_horizon(f) > horizon_s * (1.0 + 1e-12)) {
        fail("spec '" + t.name + "'", "horizon " + format_number(formula_horizon(f)) + " s exceeds " +
                                          format_number(horizon_s) + " s");
      }
    } catch (const ParseError& e) {
      fail("spec '" + t.name + "'", "line " + std::to_string(e.line()) + ", column " + std::to_string(e.column()) +
                                        ": " + e.detail());
    } catch (const TaskGenerationError& e) {
      fail("spec '" + t.name + "'", e.what());
    } catch (const std::invalid_argument& e) {
      fail("spec '" + t.name + "'", e.what());
    }
  }

  c.solver = read_solver(j.contains("solver") ? j.at("solver") : json::object(), n, m);

  if (j.contains("cold_start")) {
    const json& cj = j.at("cold_start");
    check_keys(cj, "cold_start", {"kind", "reference"});
    c.cold_start.kind = get<std::string>(cj, "cold_start", "kind");
    if (c.cold_start.kind == "lqr") {
      c.cold_start.reference = to_vector(get<json>(cj, "cold_start", "reference"), "cold_start.reference");
      if (c.cold_start.reference.size() != n) fail("cold_start.reference", "expected n entries");
    } else if (c.cold_start.kind != "zero") {
      fail("cold_start", "kind must be \"zero\" or \"lqr\"");
    }
  }

  if (j.contains("stages")) {
    const json& st = j.at("stages");
    check_keys(st, "stages", {"learn", "test"});
    if (st.contains("learn")) {
      const json& l = st.at("learn");
      check_keys(l, "stages.learn", {"tasks", "seed"});
      c.learn.tasks = get_or(l, "stages.learn", "tasks", c.learn.tasks);
      c.learn.seed = get_or(l, "stages.learn", "seed", c.learn.seed);
    }
    if (st.contains("test")) {
      const json& t = st.at("test");
      check_keys(t, "stages.test", {"tasks", "sigma_levels", "seed"});
      c.test.tasks = get_or(t, "stages.test", "tasks", c.test.tasks);
      c.test.sigma_levels = get_or(t, "stages.test", "sigma_levels", c.test.sigma_levels);
      c.test.seed = get_or(t, "stages.test", "seed", c.test.seed);
    }
  }
  if (c.learn.tasks < 1) fail("stages.learn.tasks", "must be >= 1");
  if (c.test.tasks < 1) fail("stages.test.tasks", "must be >= 1");
  for (double s : c.test.sigma_levels)
    if (!(s >= 0.0)) fail("stages.test.sigma_levels", "levels must be >= 0");

  c.output_dir = get_or<std::string>(j, "scenario", "output_dir", c.output_dir);
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario file '" + path.string() + "': " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace stlmtl
