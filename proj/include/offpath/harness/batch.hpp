#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "offpath/harness/metrics.hpp"
#include "offpath/harness/scenario.hpp"

namespace offpath::harness {

struct BatchOptions {
  std::uint64_t runs = 1;
  std::uint64_t seed_stride = 1;
  unsigned jobs = 1;
  std::optional<std::string> phase;
  // Called with each run index to obtain its trace stream, or null.
  std::function<std::ostream*(std::uint64_t)> trace_for;
};

// Run i uses seed cfg.seed + i * seed_stride. Results are ordered by run
// index whatever the number of jobs.
std::vector<RunResult> run_batch(const ScenarioConfig& cfg, const BatchOptions& opts);

struct CountermeasureCheck {
  std::uint64_t runs = 0;
  std::uint64_t collisions_found = 0;
  std::uint64_t tcp_hash_draws = 0;
  bool all_failed_at_collision = false;
  // True iff no collision was found and TCP never touched a hash counter.
  bool holds() const { return collisions_found == 0 && tcp_hash_draws == 0 && all_failed_at_collision; }
};

// Replays the attack against a patched victim and checks the side channel is
// closed.
CountermeasureCheck verify_no_shared_counter(const ScenarioConfig& cfg, std::uint64_t runs,
                                             unsigned jobs = 1);

}  // namespace offpath::harness
