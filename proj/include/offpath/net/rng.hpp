#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace offpath::net {

// Seeded stream. Distributions are implemented here rather than taken from
// <random> so traces stay byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Inclusive on both ends.
  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi);
  double unit();
  bool bernoulli(double p) { return unit() < p; }
  double exponential(double mean);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Fixed derivation of a sub-stream seed from the scenario seed and a stream
// name ("net", "server", "attacker", ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

}  // namespace offpath::net
