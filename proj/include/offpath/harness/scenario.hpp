#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "offpath/attack/report.hpp"
#include "offpath/harness/config.hpp"

namespace offpath::harness {

// Victim-side facts recorded at the end of a run, for checking inferences.
struct GroundTruth {
  bool connection_established = false;
  bool connection_alive = false;
  std::uint16_t client_port = 0;
  std::uint32_t rcv_nxt = 0;
  std::uint32_t rcv_wnd = 0;
  std::uint32_t snd_una = 0;
  std::uint32_t snd_nxt = 0;
  std::uint32_t snd_max_wnd = 0;
  bool df_cleared = false;
  std::string app_received;
  std::uint64_t server_tcp_hash_draws = 0;
  std::uint64_t server_challenge_acks = 0;
  std::uint64_t server_duplicate_acks = 0;
  std::uint64_t attacker_foreign_packets = 0;
  std::uint64_t attacker_peak_rate = 0;
};

struct RunResult {
  std::uint64_t seed = 0;
  ScenarioKind kind = ScenarioKind::FullReset;
  attack::AttackReport report;
  GroundTruth truth;
  std::uint64_t packets_attacker = 0;
  std::uint64_t packets_server = 0;
  std::uint64_t packets_client = 0;
  std::uint64_t packets_lost = 0;
  std::uint64_t events = 0;
  net::SimTime end_ms = 0;
  std::vector<net::Ipv4Addr> enumerated;

  bool success() const { return report.success(); }
};

struct RunOptions {
  std::ostream* trace = nullptr;
  // Run one phase only, with its prerequisites prepared from ground truth.
  std::optional<std::string> phase;
};

// Names accepted by RunOptions::phase.
const std::vector<std::string>& phase_names();

RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {});

struct JitterResult {
  attack::JitterMeasurement below;
  attack::JitterMeasurement inside;
  // Server-side TCP draws on the shared counter during each measurement.
  std::uint64_t below_draws = 0;
  std::uint64_t inside_draws = 0;
};

// Runs the duplicate-ACK jitter measurement just below and just inside the
// receive window of a prepared connection.
JitterResult run_jitter_experiment(const ScenarioConfig& cfg, int probes, net::SimTime span_ms);

}  // namespace offpath::harness
