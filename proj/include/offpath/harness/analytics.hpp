#pragma once

#include <cstdint>

namespace offpath::harness {

// 1 - (1 - 1/counters)^k: chance that at least one of k attacker addresses
// shares the client's counter.
double collision_probability(std::uint64_t k, std::uint64_t counters = 2048);

// Binomial standard deviation of an empirical rate over `trials`.
double binomial_sigma(double p, std::uint64_t trials);

struct OracleStats {
  std::uint64_t counters = 0;
  std::uint64_t pool = 0;
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  double empirical = 0.0;
  double analytic = 0.0;
  double sigma = 0.0;

  bool within(double n_sigma) const;
};

// Collision experiment on a reduced counter pool: each trial draws a fresh
// boot key, hashes the client's flow and k random attacker addresses with the
// real counter-index hash reduced modulo `counters`, and records whether any
// attacker address lands on the client's counter.
OracleStats oracle_small_pool(std::uint64_t counters, std::uint64_t k, std::uint64_t trials,
                              std::uint64_t seed);

}  // namespace offpath::harness
