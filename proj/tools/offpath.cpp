#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "offpath/contract.hpp"
#include "offpath/harness/analytics.hpp"
#include "offpath/harness/batch.hpp"
#include "offpath/harness/config.hpp"
#include "offpath/harness/metrics.hpp"

namespace fs = std::filesystem;
using namespace offpath;

namespace {

// Relative output paths land in $OFFPATH_OUTPUT_DIR when it is set.
fs::path output_path(const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) {
    if (const char* dir = std::getenv("OFFPATH_OUTPUT_DIR"); dir && *dir) path = fs::path(dir) / path;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  return path;
}

fs::path run_trace_path(const fs::path& base, std::uint64_t i, std::uint64_t runs) {
  if (runs == 1) return base;
  return fs::path(base.string() + fmt::format(".run{}", i));
}

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::uint64_t runs = 1;
  std::string trace;
  std::string summary;
  std::string phase;
  unsigned jobs = 1;
};

int cmd_run(const RunArgs& args) {
  auto load = harness::load_config_file(args.config);
  if (!load.config) {
    std::cerr << "config " << args.config << " is invalid:\n";
    for (const auto& e : load.errors) std::cerr << "  " << e.path << ": " << e.message << "\n";
    return 2;
  }
  auto cfg = *load.config;
  if (args.seed) cfg.seed = *args.seed;

  harness::BatchOptions opts;
  opts.runs = args.runs;
  opts.jobs = args.jobs;
  if (!args.phase.empty()) opts.phase = args.phase;

  std::vector<std::unique_ptr<std::ofstream>> traces(args.runs);
  if (!args.trace.empty()) {
    auto base = output_path(args.trace);
    for (std::uint64_t i = 0; i < args.runs; ++i) {
      traces[i] = std::make_unique<std::ofstream>(run_trace_path(base, i, args.runs));
      if (!*traces[i]) {
        std::cerr << "cannot open trace file " << run_trace_path(base, i, args.runs) << "\n";
        return 2;
      }
    }
    opts.trace_for = [&](std::uint64_t i) -> std::ostream* { return traces[i].get(); };
  }

  auto wall_start = std::chrono::steady_clock::now();
  auto runs = harness::run_batch(cfg, opts);
  auto wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  auto batch = harness::summarize(runs);

  std::cout << harness::render_table(runs, batch);
  std::cout << fmt::format("wall clock: {:.2f} s\n", wall_s);
  if (!args.summary.empty()) {
    auto path = output_path(args.summary);
    std::ofstream out(path);
    if (!out) {
      std::cerr << "cannot open summary file " << path << "\n";
      return 2;
    }
    out << harness::summary_document(cfg, runs, batch).dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-path TCP hijacking simulator"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario (or a batch of seeded runs)");
  run_cmd->add_option("--config", run.config, "Scenario YAML file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", run.seed, "Override the scenario seed");
  run_cmd->add_option("--runs", run.runs, "Number of runs; run i uses seed + i")->check(CLI::PositiveNumber);
  run_cmd->add_option("--trace", run.trace, "Event trace path (.runK suffix per run when runs > 1)");
  run_cmd->add_option("--summary", run.summary, "JSON summary path");
  run_cmd->add_option("--phase", run.phase, "Run a single phase against a prepared scenario")
      ->check(CLI::IsMember(harness::phase_names()));
  run_cmd->add_option("--jobs", run.jobs, "Parallel simulations")->check(CLI::PositiveNumber);

  std::uint64_t pool = 0;
  auto* calc_cmd = app.add_subcommand("calc", "Collision probability for a pool of k addresses");
  calc_cmd->add_option("--pool", pool, "Pool size k")->required();

  std::uint64_t counters = 16, k = 16, trials = 10000, seed = 1;
  auto* oracle_cmd = app.add_subcommand("oracle", "Brute-force collision experiment on a reduced counter pool");
  oracle_cmd->add_option("--counters", counters)->check(CLI::Range(2, 2048));
  oracle_cmd->add_option("--pool", k);
  oracle_cmd->add_option("--trials", trials)->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*calc_cmd) {
      std::cout << fmt::format("{:.6f}\n", harness::collision_probability(pool));
      return 0;
    }
    if (*oracle_cmd) {
      auto s = harness::oracle_small_pool(counters, k, trials, seed);
      std::cout << fmt::format("counters={} pool={} trials={} empirical={:.4f} analytic={:.4f} sigma={:.4f}\n",
                               s.counters, s.pool, s.trials, s.empirical, s.analytic, s.sigma);
      return 0;
    }
  } catch (const ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
