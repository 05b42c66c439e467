#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "offpath/net/time.hpp"

namespace offpath::attack {

// Forward distance between two IPIDs, modulo 2^16.
constexpr std::uint16_t ipid_delta(std::uint16_t from, std::uint16_t to) {
  return static_cast<std::uint16_t>(to - from);
}

struct IpidSample {
  net::SimTime send_time = 0;
  // Empty when the echo reply never arrived.
  std::optional<std::uint16_t> ipid;
};

// An IPID stream read from echo replies. A gap is a position whose delta from
// the previous sample is 2 or more; in a linearized stream every background
// step is exactly 1.
struct IpidObservation {
  std::vector<IpidSample> samples;
  std::vector<std::size_t> gaps;
  std::vector<std::size_t> missing;

  void annotate();
  bool complete() const { return missing.empty(); }
  // Sum of (delta - 1) over consecutive pairs; only meaningful when complete.
  std::uint64_t extra_increments() const;
};

}  // namespace offpath::attack
