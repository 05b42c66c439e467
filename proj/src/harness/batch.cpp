#include "offpath/harness/batch.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "offpath/contract.hpp"

namespace offpath::harness {

std::vector<RunResult> run_batch(const ScenarioConfig& cfg, const BatchOptions& opts) {
  expects(opts.runs >= 1, "batch needs at least one run");
  std::vector<RunResult> results(opts.runs);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;

  auto worker = [&] {
    for (;;) {
      auto i = next.fetch_add(1);
      if (i >= opts.runs) return;
      try {
        ScenarioConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + i * opts.seed_stride;
        RunOptions ro;
        ro.phase = opts.phase;
        if (opts.trace_for) ro.trace = opts.trace_for(i);
        results[i] = run_scenario(run_cfg, ro);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = opts.runs;
      }
    }
  };

  unsigned jobs = std::max(1u, std::min<unsigned>(opts.jobs, static_cast<unsigned>(opts.runs)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return results;
}

CountermeasureCheck verify_no_shared_counter(const ScenarioConfig& cfg, std::uint64_t runs, unsigned jobs) {
  BatchOptions opts;
  opts.runs = runs;
  opts.jobs = jobs;
  auto results = run_batch(cfg, opts);
  CountermeasureCheck check;
  check.runs = runs;
  check.all_failed_at_collision = true;
  for (const auto& r : results) {
    const auto* c = r.report.find("collision");
    if (c && c->success) ++check.collisions_found;
    if (!c || c->success || c->reason != attack::FailureReason::NoCollision) check.all_failed_at_collision = false;
    check.tcp_hash_draws += r.truth.server_tcp_hash_draws;
  }
  return check;
}

}  // namespace offpath::harness
