#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "offpath/net/time.hpp"

namespace offpath::attack {

enum class FailureReason {
  None,
  NoCollision,
  NoConnection,
  NoAcceptableSeq,
  Ambiguous,
  NoJitter,
  NoBoundary,
  ConnectionReset,
  Stale,
  BadAck,
  Timeout,
  // The harness found the phase's output contradicts victim ground truth.
  WrongInference,
  NotDowngraded,
};

const char* to_string(FailureReason reason);

struct PhaseRecord {
  std::string name;
  net::SimTime start_ms = 0;
  net::SimTime end_ms = 0;
  std::uint64_t packets_sent = 0;
  bool success = false;
  FailureReason reason = FailureReason::None;
  // The phase's main output (address, port, sequence number...), if any.
  std::optional<std::uint64_t> inferred;
  // Phase-specific counters such as trials or retries.
  std::map<std::string, std::uint64_t> counters;

  net::SimTime duration() const { return end_ms - start_ms; }
};

struct AttackReport {
  std::vector<PhaseRecord> phases;

  bool success() const;
  // First failing phase's reason, or None.
  FailureReason failure() const;
  const PhaseRecord* find(const std::string& name) const;
  net::SimTime total_ms() const;
};

}  // namespace offpath::attack
