#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "stlmtl/commands.hpp"
#include "stlmtl/report.hpp"

using namespace stlmtl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("stlmtl_" + tag + "_" + std::to_string(std::rand()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

json small_scenario(double sigma) {
  auto p = [&](double nominal) { return json{{"nominal", nominal}, {"sigma", sigma}}; };
  return json{
      {"name", "small"},
      {"system", {{"type", "mass_spring_damper"}, {"mass", 1.0}, {"ks", 2.0}, {"damping", 0.2}, {"dt", 0.1}}},
      {"x0", {0.0, 0.0}},
      {"horizon_steps", 40},
      {"specs",
       {{{"name", "reach"}, {"pattern", "F[{ta},{tb}](x1 >= {c})"}, {"params", {{"ta", p(1.5)}, {"tb", p(2)}, {"c", p(1)}}}},
        {{"name", "settle"}, {"pattern", "G[{ta},{tb}](x1 <= {c})"}, {"params", {{"ta", p(3.5)}, {"tb", p(4)}, {"c", p(0)}}}}}},
      {"solver", {{"max_iterations", 200}, {"linearization", "gauss_newton"}}},
      {"stages", {{"learn", {{"tasks", 4}, {"seed", 3}}}, {"test", {{"tasks", 3}, {"sigma_levels", {0.1, 0.2}}, {"seed", 4}}}}},
  };
}

fs::path write_scenario(const TempDir& dir, const json& j, const std::string& name = "scenario.json") {
  const fs::path p = dir.path / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

CommandOptions options(const fs::path& config, const fs::path& out) {
  CommandOptions o;
  o.config = config;
  o.out = out;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::size_t columns(const std::string& line) { return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1; }

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_CASE("scenario files in the repository load") {
  for (const char* name : {"msd.json", "atc.json"}) {
    const ScenarioConfig cfg = load_scenario(fs::path(STLMTL_SCENARIO_DIR) / name);
    CHECK(cfg.specs.size() == 5);
    CHECK(cfg.test.sigma_levels.size() >= 2);
    // The echoed config reloads to the same echo.
    CHECK(scenario_from_json(cfg.to_json()).to_json() == cfg.to_json());
  }
  const ScenarioConfig msd = load_scenario(fs::path(STLMTL_SCENARIO_DIR) / "msd.json");
  CHECK(msd.horizon_steps == 300);
  CHECK(msd.learn.tasks == 25);
  CHECK(msd.test.tasks == 10);
}

TEST_CASE("malformed formula is a config error with its position") {
  TempDir dir("badfmt");
  json j = small_scenario(0.1);
  j["specs"][1]["pattern"] = "G[{ta},{tb}](x1 <= {c}";
  const fs::path cfg = write_scenario(dir, j);
  try {
    resolve_scenario(options(cfg, dir.path / "out"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("settle") != std::string::npos);
    CHECK(msg.find("line 1, column") != std::string::npos);
  }
  CHECK(cmd_solve(options(cfg, dir.path / "out")) == kExitConfigError);
  CHECK(cmd_learn(options(cfg, dir.path / "out")) == kExitConfigError);
}

TEST_CASE("other config errors") {
  TempDir dir("badcfg");
  json unknown = small_scenario(0.1);
  unknown["solver"]["tolerance"] = 1;
  CHECK(cmd_solve(options(write_scenario(dir, unknown, "a.json"), dir.path / "out")) == kExitConfigError);
  json late = small_scenario(0.1);
  late["horizon_steps"] = 30;
  CHECK(cmd_solve(options(write_scenario(dir, late, "b.json"), dir.path / "out")) == kExitConfigError);
  json var = small_scenario(0.1);
  var["specs"][0]["pattern"] = "F[{ta},{tb}](x3 >= {c})";
  CHECK(cmd_solve(options(write_scenario(dir, var, "c.json"), dir.path / "out")) == kExitConfigError);
  CHECK(cmd_solve(options(dir.path / "missing.json", dir.path / "out")) == kExitConfigError);
  std::ofstream(dir.path / "d.json") << "{ not json";
  CHECK(cmd_solve(options(dir.path / "d.json", dir.path / "out")) == kExitConfigError);
}

TEST_CASE("solve writes its artifacts") {
  TempDir dir("solve");
  const fs::path cfg = write_scenario(dir, small_scenario(0.1));
  const fs::path out = dir.path / "out";
  REQUIRE(cmd_solve(options(cfg, out)) == kExitOk);

  const auto rows = lines(out / "trajectory.csv");
  REQUIRE(rows.size() == 42);  // header plus steps 0..40
  CHECK(rows[0] == "step,t,x1,x2,u1");
  for (const auto& r : rows) CHECK(columns(r) == 2 + 2 + 1);

  const json run = read_json(out / "run.json");
  CHECK(run["result"]["converged"] == true);
  CHECK(run["result"]["rho_exact"].get<double>() > 0);
  CHECK(run["boolean_sat"] == true);
  json expected = load_scenario(cfg).to_json();
  expected["output_dir"] = out.string();
  CHECK(run["config"] == expected);
  CHECK(run["config"]["solver"].contains("eta_good"));  // defaults are expanded
  CHECK(fs::file_size(out / "trajectory.svg") > 0);
}

TEST_CASE("zero iteration budget fails the solve") {
  TempDir dir("budget");
  json j = small_scenario(0.1);
  j["solver"]["max_iterations"] = 0;
  const fs::path out = dir.path / "out";
  CHECK(cmd_solve(options(write_scenario(dir, j), out)) == kExitSolverFailure);
  const json run = read_json(out / "run.json");
  CHECK(run["result"]["iterations"] == 0);
  CHECK(run["result"]["converged"] == false);
}

TEST_CASE("learn and test round trip") {
  TempDir dir("stages");
  const fs::path cfg = write_scenario(dir, small_scenario(0.1));
  const fs::path out = dir.path / "out";
  REQUIRE(cmd_learn(options(cfg, out)) == kExitOk);

  const auto controls = lines(out / "learn" / "controls.csv");
  CHECK(controls.size() == 41);  // header plus N_T rows
  CHECK(read_controls_csv(out / "learn" / "controls.csv").rows() == 40);
  const json report = read_json(out / "learn" / "report.json");
  CHECK(report["tasks"].size() == 4);
  CHECK(report["avg_rd_history"].back().get<double>() > 0);
  CHECK(report["config"]["stages"]["learn"]["seed"] == 3);
  CHECK_FALSE(report.contains("wall_seconds"));
  CHECK(read_json(out / "learn" / "timing.json").contains("wall_seconds"));

  const std::string first = slurp(out / "learn" / "report.json");
  REQUIRE(cmd_learn(options(cfg, out)) == kExitOk);
  CHECK(slurp(out / "learn" / "report.json") == first);

  CommandOptions warm = options(cfg, out);
  warm.workers = 2;
  REQUIRE(cmd_test(warm) == kExitOk);
  const json summary = read_json(out / "test" / "summary.json");
  CHECK(summary["mode"] == "warm");
  REQUIRE(summary["levels"].size() == 2);
  CHECK(summary["levels"][0]["tasks"].size() == 3);
  CHECK(summary["config"].contains("solver"));
  CHECK(fs::exists(out / "test" / "rd_vs_iter.svg"));
  for (const auto& entry : fs::directory_iterator(out / "test")) {
    if (!entry.is_directory()) continue;
    for (const auto& f : fs::directory_iterator(entry.path())) {
      const auto rows = lines(f.path());
      CHECK(rows.size() == 42);
      CHECK(columns(rows[1]) == 5);
    }
  }

  CommandOptions cold = options(cfg, out);
  cold.cold = true;
  CHECK(cmd_test(cold) == kExitOk);
  CHECK(read_json(out / "test" / "summary.json")["mode"] == "cold");
}

TEST_CASE("seed override changes both stages") {
  TempDir dir("seed");
  const fs::path cfg = write_scenario(dir, small_scenario(0.1));
  CommandOptions o = options(cfg, dir.path / "out");
  o.seed = 100;
  const ScenarioConfig c = resolve_scenario(o);
  CHECK(c.learn.seed == 100);
  CHECK(c.test.seed == 101);
}

TEST_CASE("one unperturbed learning task matches solve") {
  TempDir dir("reduce");
  json j = small_scenario(0.0);
  j["stages"]["learn"]["tasks"] = 1;
  const fs::path cfg = write_scenario(dir, j);
  REQUIRE(cmd_solve(options(cfg, dir.path / "out")) == kExitOk);
  REQUIRE(cmd_learn(options(cfg, dir.path / "out")) == kExitOk);
  CHECK(slurp(dir.path / "out" / "trajectory.csv") == slurp(dir.path / "out" / "learn" / "trajectory.csv"));
  const json run = read_json(dir.path / "out" / "run.json");
  const json rep = read_json(dir.path / "out" / "learn" / "report.json");
  CHECK(run["result"] == rep["result"]);
}

TEST_CASE("missing or mismatched warm start") {
  TempDir dir("warm");
  const fs::path cfg = write_scenario(dir, small_scenario(0.1));
  CommandOptions o = options(cfg, dir.path / "out");
  CHECK(cmd_test(o) == kExitConfigError);  // no learn/controls.csv yet
  o.warm = dir.path / "nope.csv";
  CHECK(cmd_test(o) == kExitConfigError);
  write_controls_csv(dir.path / "short.csv", StepMatrix::Zero(10, 1), {"u1"});
  o.warm = dir.path / "short.csv";
  CHECK(cmd_test(o) == kExitConfigError);
}

TEST_CASE("command-line front end") {
  TempDir dir("exe");
  const fs::path cfg = write_scenario(dir, small_scenario(0.1));
  const std::string exe = STL_MTL_EXE;
  const std::string quiet = " >/dev/null 2>&1";
  auto run = [&](const std::string& args) {
    const int status = std::system((exe + " " + args + quiet).c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("solve --config " + cfg.string() + " --out " + (dir.path / "o").string()) == 0);
  CHECK(run("solve --config " + (dir.path / "missing.json").string()) == 2);
  CHECK(run("test --config " + cfg.string() + " --warm a.csv --cold") == 2);
  CHECK(run("bogus") == 2);
  CHECK(run("") == 2);
}
