// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "stlmtl/commands.hpp"
#include "stlmtl/dsl.hpp"
#include "stlmtl/report.hpp"
#include "support/oracle.hpp"
#include "support/random_formula.hpp"

using namespace stlmtl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scenario(const char* name) { return fs::path(STLMTL_SCENARIO_DIR) / name; }

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "stlmtl_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::vector<Formula> corpus(int count, std::uint64_t seed, const testing::FormulaGen& gen) {
  std::mt19937_64 rng(seed);
  std::vector<Formula> out;
  for (int i = 0; i < count; ++i) out.push_back(gen(rng));
  return out;
}

// 1. Exact robustness against window enumeration, plus soundness.
Outcome semantics_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  testing::FormulaGen gen;
  std::mt19937_64 rng(1001);
  int mismatches = 0, unsound = 0;
  double worst = 0.0;
  for (const Formula& f : corpus(1000, 1, gen)) {
    const Trace tr = gen.trace(rng, gen.steps_for(f) + 3);
    for (int k = 0; k <= 3; ++k) {
      const double rho = eval_exact(f, tr, k);
      const double ref = testing::oracle_rho(f, tr, k);
      if (std::isinf(ref) || std::isinf(rho)) {
        if (rho != ref) ++mismatches;
      } else {
        const double err = std::abs(rho - ref) / std::max(1.0, std::abs(ref));
        worst = std::max(worst, err);
        if (err > 1e-12) ++mismatches;
      }
      const bool sat = boolean_sat(f, tr, k);
      if ((rho > 0 && !sat) || (rho < 0 && sat)) ++unsound;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && unsound == 0 && secs < 10.0,
          fmt::format("4000 evaluations, {} mismatches (worst rel {:.1e}), {} unsound, {:.2f} s", mismatches, worst,
                      unsound, secs)};
}

// 2. LSE sandwich at every node; error shrinks as K grows.
Outcome lse_bounds() {
  testing::FormulaGen gen;
  std::mt19937_64 rng(2002);
  const double Ks[] = {1.0, 10.0, 100.0, 1000.0};
  long nodes = 0, violations = 0;
  int checked = 0, non_monotone = 0, skipped = 0;
  for (const Formula& f : corpus(1000, 1, gen)) {
    const Trace tr = gen.trace(rng, gen.steps_for(f));
    const RobustnessProgram prog(f, tr.dt, tr.num_steps());
    const double exact = prog.exact(tr.states);
    bool distinct = true;
    double prev = std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (double K : Ks) {
      const double v = prog.smooth_observed(tr.states, K, [&](const RobustnessProgram::NodeEvent& e) {
        ++nodes;
        const double lo = *std::min_element(e.args.begin(), e.args.end());
        const double hi = *std::max_element(e.args.begin(), e.args.end());
        const double slack = std::log(static_cast<double>(e.args.size())) / K;
        const double tol = std::isfinite(e.value) ? 1e-12 * std::max(1.0, std::abs(e.value)) : 0.0;
        const bool ok = e.is_max ? (e.value >= hi - tol && e.value <= hi + slack + tol)
                                 : (e.value <= lo + tol && e.value >= lo - slack - tol);
        if (!ok) ++violations;
        std::vector<double> sorted(e.args.begin(), e.args.end());
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) distinct = false;
      });
      const double err = std::isinf(exact) && v == exact ? 0.0 : std::abs(v - exact);
      if (err > prev + 1e-12) monotone = false;
      prev = err;
    }
    if (!distinct) {
      ++skipped;
      continue;
    }
    ++checked;
    if (!monotone) ++non_monotone;
  }
  return {violations == 0 && non_monotone == 0 && checked > 0,
          fmt::format("{} node checks, {} bound violations; shrink over K in {{1,10,100,1000}}: {} of {} formulas "
                      "non-monotone ({} skipped for tied arguments)",
                      nodes, violations, non_monotone, checked, skipped)};
}

// 3. Gradient against central differences.
Outcome gradient_check() {
  testing::FormulaGen gen;
  gen.allow_true = false;
  std::mt19937_64 rng(3003);
  double worst = 0.0;
  for (const Formula& f : corpus(100, 3, gen)) {
    Trace tr = gen.trace(rng, gen.steps_for(f));
    const SmoothGradient g = grad_smooth(f, tr, {10.0});
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < tr.states.size(); ++i) {
      double& x = tr.states.data()[i];
      const double x0 = x;
      x = x0 + h;
      const double up = eval_smooth(f, tr, {10.0});
      x = x0 - h;
      const double dn = eval_smooth(f, tr, {10.0});
      x = x0;
      const double fd = (up - dn) / (2 * h);
      worst = std::max(worst, std::abs(g.gradient.data()[i] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return {worst < 1e-5, fmt::format("100 pairs, max relative error {:.2e}", worst)};
}

// 4. Condensed map against the rollout.
Outcome condensation() {
  std::mt19937_64 rng(4004);
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> dim(1, 8), len(1, 50);
  double worst = 0.0, largest = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = dim(rng), m = dim(rng), N = len(rng);
    LinearSystem sys;
    sys.A.resize(n, n);
    sys.B.resize(n, m);
    for (Eigen::Index i = 0; i < sys.A.size(); ++i) sys.A.data()[i] = n01(rng);
    // Spectral radius in [0.5, 1] keeps states O(1) over the horizon, so an
    // absolute tolerance is meaningful in double precision.
    const double rho = sys.A.eigenvalues().cwiseAbs().maxCoeff();
    if (rho > 0) sys.A *= (0.5 + 0.5 * std::uniform_real_distribution<double>(0, 1)(rng)) / rho;
    for (Eigen::Index i = 0; i < sys.B.size(); ++i) sys.B.data()[i] = n01(rng);
    sys.dt = 0.1;
    Eigen::VectorXd x0(n);
    for (int i = 0; i < n; ++i) x0[i] = n01(rng);
    StepMatrix u(N, m);
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = n01(rng);
    const Trajectory t = rollout(sys, x0, u);
    const CondensedMap cm = condensed_map(sys, x0, N);
    const StepMatrix tail = t.trace.states.bottomRows(N);
    worst = std::max(worst, (cm.gamma * flatten(u) + cm.d - flatten(tail)).cwiseAbs().maxCoeff());
    largest = std::max(largest, flatten(tail).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-10, fmt::format("100 systems, max |error| {:.2e}, largest |state| {:.1f}", worst, largest)};
}

// 5. Trust-region subproblem against random feasible samples.
Outcome subproblem() {
  std::mt19937_64 rng(5005);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01(0, 1);
  std::uniform_int_distribution<int> dims(1, 30);
  const double tol = ScpConfig{}.tol_kkt;
  int beaten = 0, failed = 0;
  double worst_kkt = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = dims(rng);
    const int m = 1 + trial % 3;
    const int rank = 1 + static_cast<int>(u01(rng) * dim);
    Eigen::MatrixXd L(dim, rank);
    for (Eigen::Index i = 0; i < L.size(); ++i) L.data()[i] = n01(rng);
    QuadraticModel model;
    model.anchor.resize(dim);
    for (int i = 0; i < dim; ++i) model.anchor[i] = n01(rng);
    model.value = n01(rng);
    model.gradient.resize(dim);
    for (int i = 0; i < dim; ++i) model.gradient[i] = 3 * n01(rng);
    model.hessian = -(L * L.transpose()) / rank;
    const double radius = 0.1 + 2 * u01(rng);
    ControlBox box;
    if (trial % 2) {
      box.lower = Eigen::VectorXd::Constant(m, -0.5 - u01(rng));
      box.upper = Eigen::VectorXd::Constant(m, 0.5 + u01(rng));
      // Keep the anchor inside the box so the feasible set is nonempty.
      for (int i = 0; i < dim; ++i)
        model.anchor[i] = std::clamp(model.anchor[i], (*box.lower)[i % m], (*box.upper)[i % m]);
    }
    const SubproblemResult r = solve_subproblem(model, radius, box, m, tol);
    if (!r.ok) ++failed;
    worst_kkt = std::max(worst_kkt, r.kkt_residual);
    const double best = model(r.u);
    Eigen::VectorXd lo(dim), hi(dim), s(dim);
    for (int i = 0; i < dim; ++i) {
      lo[i] = model.anchor[i] - radius;
      hi[i] = model.anchor[i] + radius;
      if (box.lower) lo[i] = std::max(lo[i], (*box.lower)[i % m]);
      if (box.upper) hi[i] = std::min(hi[i], (*box.upper)[i % m]);
    }
    for (int k = 0; k < 100000; ++k) {
      for (int i = 0; i < dim; ++i) s[i] = lo[i] + u01(rng) * (hi[i] - lo[i]);
      if (model(s) > best + 1e-9 * std::max(1.0, std::abs(best))) {
        ++beaten;
        break;
      }
    }
  }
  return {beaten == 0 && failed == 0 && worst_kkt <= tol,
          fmt::format("100 problems, {} beaten by sampling, {} not converged, max KKT residual {:.1e}", beaten, failed,
                      worst_kkt)};
}

// 6. Spring-mass base task from a cold start.
Outcome msd_solve() {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig cfg = load_scenario(scenario("msd.json"));
  const StageSetup s = cfg.setup();
  const Formula f = base_task(cfg.specs, s.sys.var_names).formula();
  const ScpResult r = scp_run(s.sys, s.x0, {{1.0, f}}, s.cfg, s.cold_controls(), StopRule::single(f));
  const auto x1 = r.trajectory.trace.states.col(0);
  auto all = [&](int a, int b, const std::function<bool(double)>& p) {
    for (int k = a; k <= b; ++k)
      if (!p(x1[k])) return false;
    return true;
  };
  auto any = [&](int a, int b, const std::function<bool(double)>& p) {
    for (int k = a; k <= b; ++k)
      if (p(x1[k])) return true;
    return false;
  };
  const bool windows = all(40, 60, [](double v) { return v > 9; }) && any(100, 120, [](double v) { return v < -10; }) &&
                       all(160, 180, [](double v) { return v < -12; }) && any(220, 240, [](double v) { return v > 13; }) &&
                       all(280, 300, [](double v) { return v < -15; });
  const double secs = seconds_since(t0);
  return {r.converged && r.rho_exact > 0 && r.iterations <= 600 && windows && secs < 120,
          fmt::format("{} after {} passes, RD {:.4f}, window checks {}, {:.1f} s", to_string(r.status), r.iterations,
                      r.rho_exact, windows ? "hold" : "FAIL", secs)};
}

fs::path learn_out(const char* tag, int run) { return work_dir() / fmt::format("{}_{}", tag, run); }

int run_learn(const char* file, const char* tag, int run) {
  CommandOptions o;
  o.config = scenario(file);
  o.out = learn_out(tag, run);
  return cmd_learn(o);
}

// 7. Spring-mass learning stage.
Outcome msd_learn() {
  const auto t0 = std::chrono::steady_clock::now();
  const int rc = run_learn("msd.json", "msd", 0);
  const json rep = json::parse(slurp(learn_out("msd", 0) / "learn" / "report.json"));
  const auto& avg = rep.at("avg_rd_history");
  const bool series = !avg.empty() && rep.at("min_rd_history").size() == avg.size() &&
                      rep.at("max_rd_history").size() == avg.size();
  const double last = avg.empty() ? 0.0 : avg.back().get<double>();
  const int iters = rep.at("result").at("iterations").get<int>();
  return {rc == kExitOk && series && last > 0 && iters <= 600,
          fmt::format("{} tasks, {} passes, final average RD {:.4f}, {:.0f}% of tasks satisfied, {:.1f} s",
                      rep.at("tasks").size(), iters, last, 100 * rep.at("satisfied_fraction").get<double>(),
                      seconds_since(t0))};
}

struct Paired {
  double warm_mean = 0, cold_mean = 0;
  int warm_converged = 0, cold_converged = 0, tasks = 0;
  std::vector<int> warm_iters, cold_iters;
};

Paired paired_test(const ScenarioConfig& cfg, const StepMatrix& u_learn, double sigma) {
  const StageSetup s = cfg.setup();
  const StageReport warm = testing_stage(s, cfg.test.tasks, sigma, u_learn, cfg.test.seed, workers());
  const StageReport cold = testing_stage(s, cfg.test.tasks, sigma, s.cold_controls(), cfg.test.seed, workers());
  Paired p;
  p.tasks = static_cast<int>(warm.runs.size());
  for (std::size_t i = 0; i < warm.runs.size(); ++i) {
    p.warm_iters.push_back(warm.runs[i].result.iterations);
    p.cold_iters.push_back(cold.runs[i].result.iterations);
    p.warm_mean += warm.runs[i].result.iterations;
    p.cold_mean += cold.runs[i].result.iterations;
  }
  p.warm_mean /= p.tasks;
  p.cold_mean /= p.tasks;
  p.warm_converged = warm.num_converged();
  p.cold_converged = cold.num_converged();
  return p;
}

double median(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// 8. Warm starts on the spring-mass test sets.
Outcome msd_few_shot() {
  const ScenarioConfig cfg = load_scenario(scenario("msd.json"));
  const fs::path controls = learn_out("msd", 0) / "learn" / "controls.csv";
  if (!fs::exists(controls)) return {false, "no learned controls"};
  const StepMatrix u_learn = read_controls_csv(controls);
  bool pass = true;
  std::string detail;
  for (double sigma : {2.5, 3.5}) {
    const Paired p = paired_test(cfg, u_learn, sigma);
    const double ratio = p.warm_mean / p.cold_mean;
    const bool ok = ratio <= 0.25 && p.warm_converged >= 9 && p.cold_converged >= 9;
    pass = pass && ok;
    detail += fmt::format("{}sigma {}: warm/cold mean passes {:.1f}/{:.1f} = {:.2f}, medians {:.1f}/{:.1f}, converged "
                          "warm {}/{} cold {}/{} (warm [{}], cold [{}])",
                          detail.empty() ? "" : "; ", sigma, p.warm_mean, p.cold_mean, ratio, median(p.warm_iters),
                          median(p.cold_iters), p.warm_converged, p.tasks, p.cold_converged, p.tasks,
                          join(p.warm_iters), join(p.cold_iters));
  }
  return {pass, detail};
}

// 9. Quadrotor scenario.
Outcome atc() {
  const ScenarioConfig cfg = load_scenario(scenario("atc.json"));
  const int rc = run_learn("atc.json", "atc", 0);
  const fs::path dir = learn_out("atc", 0) / "learn";
  const json rep = json::parse(slurp(dir / "report.json"));
  const bool learned = rc == kExitOk && rep.at("avg_rd_history").back().get<double>() > 0 &&
                       rep.at("result").at("iterations").get<int>() <= 2500;

  const StageSetup s = cfg.setup();
  const StepMatrix u_learn = read_controls_csv(dir / "controls.csv");
  const StepMatrix x = rollout(s.sys, s.x0, u_learn).trace.states;
  double clearance = std::numeric_limits<double>::infinity();
  double d_way = clearance, d_term = clearance;
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    const double px = x(k, 3), py = x(k, 4), pz = x(k, 5);
    clearance = std::min(clearance, px * px + py * py - 1.5 * 1.5);
    d_way = std::min(d_way, (px + 5) * (px + 5) + (py + 2) * (py + 2) + (pz - 3) * (pz - 3));
    d_term = std::min(d_term, (px + 2.5) * (px + 2.5) + (py - 2.5) * (py - 2.5) + (pz - 1) * (pz - 1));
  }
  const bool geometry = clearance >= -1e-6 && d_way <= 0.25 && d_term <= 0.25;

  bool tested = true;
  std::string levels;
  for (double sigma : cfg.test.sigma_levels) {
    const Paired p = paired_test(cfg, u_learn, sigma);
    const double ratio = p.warm_mean / p.cold_mean;
    tested = tested && ratio <= 0.25;
    levels += fmt::format("{}sigma {}: {:.1f}/{:.1f} = {:.2f}", levels.empty() ? "" : ", ", sigma, p.warm_mean,
                          p.cold_mean, ratio);
  }
  return {learned && geometry && tested,
          fmt::format("learning {} passes, final average RD {:.4f}; min x4^2+x5^2-1.5^2 = {:.3f}; closest squared "
                      "distance to waypoint {:.3f}, terminal {:.3f} (need <= 0.25); warm/cold mean passes {}",
                      rep.at("result").at("iterations").get<int>(), rep.at("avg_rd_history").back().get<double>(),
                      clearance, d_way, d_term, levels)};
}

// 10. Byte-identical reports on repeat runs into the same output directory.
Outcome determinism() {
  bool same = true;
  std::string detail;
  for (const auto& [file, tag] : {std::pair{"msd.json", "msd"}, std::pair{"atc.json", "atc"}}) {
    const fs::path report = learn_out(tag, 0) / "learn" / "report.json";
    if (!fs::exists(report)) run_learn(file, tag, 0);
    const std::string a = slurp(report);
    run_learn(file, tag, 0);
    const std::string b = slurp(report);
    const bool eq = !a.empty() && a == b;
    same = same && eq;
    detail += fmt::format("{}{}: {} bytes, {}", detail.empty() ? "" : "; ", tag, a.size(), eq ? "identical" : "DIFFER");
  }
  return {same, detail};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"semantics oracle", semantics_oracle},
      {"LSE bounds", lse_bounds},
      {"gradient check", gradient_check},
      {"condensation oracle", condensation},
      {"subproblem optimality", subproblem},
      {"MSD base task", msd_solve},
      {"MSD learning", msd_learn},
      {"MSD warm-start test", msd_few_shot},
      {"ATC scenario", atc},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < std::size(criteria); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2zu %s: %s | %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures, std::size(criteria));
  fs::remove_all(work_dir());
  return failures == 0 ? 0 : 1;
}
