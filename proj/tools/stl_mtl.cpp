// Scenario runner: stl_mtl solve|learn|test --config <file> [options]

#include <cstdlib>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "stlmtl/commands.hpp"

int main(int argc, char** argv) {
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("STL_MTL_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));

  CLI::App app{"Multi-task STL trajectory optimization with warm-started SCP"};
  app.require_subcommand(1);

  stlmtl::CommandOptions opts;
  std::uint64_t seed = 0;
  std::string warm;
  std::string out;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the stage seeds (testing uses seed + 1)");
    sub->add_option("--out", out, "Output directory (overrides output_dir)");
  };

  auto* solve = app.add_subcommand("solve", "Solve the unperturbed task from a cold start");
  add_common(solve);
  auto* learn = app.add_subcommand("learn", "Learning stage over generated tasks");
  add_common(learn);
  auto* test = app.add_subcommand("test", "Testing stage at each sigma level");
  add_common(test);
  test->add_option("--workers", opts.workers, "Parallel task solves")->check(CLI::PositiveNumber);
  auto* warm_opt = test->add_option("--warm", warm, "Warm-start controls CSV (default <out>/learn/controls.csv)");
  test->add_flag("--cold", opts.cold, "Start every task from the cold-start controls")->excludes(warm_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : stlmtl::kExitConfigError;
  }

  auto* active = app.get_subcommands().front();
  if (active->count("--seed")) opts.seed = seed;
  if (!out.empty()) opts.out = out;
  if (!warm.empty()) opts.warm = warm;

  if (active == solve) return stlmtl::cmd_solve(opts);
  if (active == learn) return stlmtl::cmd_learn(opts);
  return stlmtl::cmd_test(opts);
}
