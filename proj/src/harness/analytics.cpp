#include "offpath/harness/analytics.hpp"

#include <cmath>

#include "offpath/contract.hpp"
#include "offpath/net/rng.hpp"
#include "offpath/victim/ipid.hpp"

namespace offpath::harness {

double collision_probability(std::uint64_t k, std::uint64_t counters) {
  expects(counters > 0, "counter count must be positive");
  return 1.0 - std::pow(1.0 - 1.0 / static_cast<double>(counters), static_cast<double>(k));
}

double binomial_sigma(double p, std::uint64_t trials) {
  if (trials == 0) return 0.0;
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

bool OracleStats::within(double n_sigma) const {
  return std::abs(empirical - analytic) <= n_sigma * sigma;
}

OracleStats oracle_small_pool(std::uint64_t counters, std::uint64_t k, std::uint64_t trials,
                              std::uint64_t seed) {
  expects(counters > 0 && trials > 0, "oracle needs counters and trials");
  net::Rng rng(seed);
  const net::Ipv4Addr server{10, 0, 0, 1};
  const net::Ipv4Addr client{10, 1, 0, 2};
  const net::Ipv4Prefix prefix{net::Ipv4Addr{100, 64, 0, 0}, 10};

  OracleStats s;
  s.counters = counters;
  s.pool = k;
  s.trials = trials;
  for (std::uint64_t t = 0; t < trials; ++t) {
    victim::SipKey key{rng.next_u64(), rng.next_u64()};
    auto target = victim::flow_hash(server, client, net::IpProto::Tcp, key) % counters;
    bool hit = false;
    for (std::uint64_t i = 0; i < k && !hit; ++i) {
      auto a = prefix.at(rng.uniform(0, prefix.size() - 1));
      hit = victim::flow_hash(server, a, net::IpProto::Icmp, key) % counters == target;
    }
    if (hit) ++s.successes;
  }
  s.empirical = static_cast<double>(s.successes) / static_cast<double>(trials);
  s.analytic = collision_probability(k, counters);
  s.sigma = binomial_sigma(s.analytic, trials);
  return s;
}

}  // namespace offpath::harness
