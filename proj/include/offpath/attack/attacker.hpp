#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "offpath/attack/forge.hpp"
#include "offpath/attack/observation.hpp"
#include "offpath/attack/prober.hpp"
#include "offpath/attack/report.hpp"
#include "offpath/net/rng.hpp"
#include "offpath/net/simulator.hpp"

namespace offpath::attack {

struct PhaseTimeouts {
  net::SimTime rtt = 10'000;
  net::SimTime downgrade = 10'000;
  net::SimTime collision = 600'000;
  net::SimTime enumerate = 3'600'000;
  net::SimTime port = 180'000;
  net::SimTime seq = 600'000;
  net::SimTime locate = 60'000;
  net::SimTime exact_seq = 120'000;
  net::SimTime ack = 120'000;
  net::SimTime reset = 60'000;
  net::SimTime inject = 30'000;
};

struct AttackConfig {
  net::Ipv4Addr server;
  std::uint16_t server_port = 22;
  net::Ipv4Addr client;
  // The attacker's own address; used for RTT measurement and as observer
  // when enumerating clients.
  net::Ipv4Addr self;
  std::vector<net::Ipv4Addr> addr_pool;
  // Source address of the forged ICMP error.
  net::Ipv4Addr router{192, 0, 2, 1};
  EmbeddedSource embedded_source = EmbeddedSource::SyntheticEchoReply;
  std::uint16_t forged_mtu = kForgedMtu;

  int probe_rate_pps = 300;
  int scan_rate_pps = 584;
  int port_scan_rate_pps = 1000;
  std::uint16_t port_lo = 32768;
  std::uint16_t port_hi = 61000;
  int retry_on_ambiguity = 1;

  std::uint32_t assumed_rcv_wnd = 87380;
  std::uint32_t assumed_snd_wnd = 16384;
  net::SimTime challenge_interval_ms = 500;
  net::SimTime pacing_margin_ms = 10;
  net::SimTime reply_margin_ms = 50;

  std::size_t collision_addrs_per_window = 16;
  std::size_t enumerate_slots_per_window = 2;
  std::size_t port_block = 64;
  std::size_t port_blocks_per_window = 3;
  std::size_t seq_block = 72;
  std::size_t seq_blocks_per_window = 2;
  // Binary-search probes are duplicated to survive a lost trigger.
  int trigger_copies = 2;
  // Exact-seq tests: a burst of this many ACKs per test window, one test per
  // jitter interval.
  int jitter_probes = 20;
  net::SimTime jitter_interval_ms = 500;

  std::string payload = "injected";
  PhaseTimeouts timeouts;
};

template <typename T>
struct PhaseResult {
  std::optional<T> value;
  FailureReason reason = FailureReason::None;

  bool ok() const { return value.has_value(); }
  static PhaseResult success(T v) { return PhaseResult{std::move(v), FailureReason::None}; }
  static PhaseResult failure(FailureReason r) { return PhaseResult{std::nullopt, r}; }
};

struct JitterMeasurement {
  int probes = 0;
  // Extra draws seen on the observed counter across all probes.
  std::uint64_t extra_increments = 0;
  net::SimTime span_ms = 0;
  bool complete = false;
};

// The off-path adversary. It owns its host and probe machinery and holds no
// reference to any victim; everything it learns arrives as echo replies to
// its own addresses.
class Attacker {
 public:
  // Called after each phase; returning a reason marks the phase failed (used
  // by the harness to apply ground-truth checks) and ends the pipeline.
  using PhaseHook = std::function<std::optional<FailureReason>(const PhaseRecord&)>;

  Attacker(net::Network& net, AttackConfig cfg, std::uint64_t seed);

  Attacker(const Attacker&) = delete;
  Attacker& operator=(const Attacker&) = delete;

  net::HostId host_id() const { return id_; }
  const AttackConfig& config() const { return cfg_; }
  const AttackReport& report() const { return report_; }
  const AttackerHost& host() const { return host_; }
  Prober& prober() { return prober_; }
  void set_phase_hook(PhaseHook hook) { hook_ = std::move(hook); }
  // True once a hook vetoed a phase or a phase failed.
  bool halted() const { return halted_; }

  PhaseResult<net::SimTime> measure_rtt();
  PhaseResult<bool> downgrade(net::Ipv4Addr client);
  PhaseResult<net::Ipv4Addr> find_colliding_address(const std::vector<net::Ipv4Addr>& pool);
  PhaseResult<std::vector<net::Ipv4Addr>> enumerate_victim_clients(net::Ipv4Addr first,
                                                                   std::uint64_t count,
                                                                   net::SimTime time_limit_ms);
  PhaseResult<std::uint16_t> detect_connection_port(net::Ipv4Addr collider);
  PhaseResult<std::uint32_t> infer_acceptable_seq(net::Ipv4Addr collider, std::uint16_t port);
  PhaseResult<std::uint32_t> locate_challenge_window(net::Ipv4Addr collider, std::uint16_t port,
                                                     std::uint32_t seq_acceptable);
  PhaseResult<std::uint32_t> detect_exact_seq(net::Ipv4Addr collider, std::uint16_t port,
                                              std::uint32_t seq_acceptable,
                                              std::uint32_t ack_challenge);
  PhaseResult<std::uint32_t> detect_acceptable_ack(net::Ipv4Addr collider, std::uint16_t port,
                                                   std::uint32_t rcv_nxt,
                                                   std::uint32_t ack_challenge);
  PhaseResult<bool> execute_reset(net::Ipv4Addr collider, std::uint16_t port,
                                  std::uint32_t rcv_nxt, std::uint32_t ack_challenge);
  PhaseResult<bool> execute_injection(std::uint16_t port, std::uint32_t rcv_nxt,
                                      std::uint32_t snd_una);

  // Single-probe primitives, exposed for experiments and tests.
  bool detect_collision(net::Ipv4Addr candidate);
  IpidObservation observe_linearized(net::Ipv4Addr observer, std::size_t n_probes, int rate_pps,
                                     std::optional<std::size_t> trigger_at = std::nullopt,
                                     std::vector<net::Packet> trigger = {});
  // Sends `probes` ACKs spread over `span_ms`, each bracketed by echoes, and
  // counts the extra increments they caused on the observed counter.
  JitterMeasurement measure_jitter(net::Ipv4Addr collider, std::uint16_t port, std::uint32_t seq,
                                   std::uint32_t ack, int probes, net::SimTime span_ms);

 private:
  enum class Signal { Positive, Negative, Ambiguous };

  void begin_phase(const std::string& name, net::SimTime timeout);
  template <typename T>
  PhaseResult<T> end_phase(PhaseResult<T> r, std::optional<std::uint64_t> inferred = {});

  net::Packet to_server(net::Ipv4Addr src, std::uint16_t sport, std::uint32_t seq,
                        std::uint32_t ack, net::TcpFlags flags, std::string payload = {}) const;
  std::vector<net::Packet> copies(const net::Packet& p, int n) const;
  // One test window with a single slot. Challenge-paced tests wait for the
  // connection's challenge ACK budget and record possible positives.
  Signal test(const Window& w, bool challenge_paced, std::uint16_t threshold = 1);
  Signal test_with_retries(const std::function<Window()>& make, bool challenge_paced,
                           std::uint16_t threshold = 1);
  // Narrows `items` (known to contain exactly one positive) down to one,
  // then confirms it. Returns the index.
  std::optional<std::size_t> binary_search(
      std::size_t count, const std::function<Window(std::size_t lo, std::size_t hi)>& make,
      bool challenge_paced);
  PhaseResult<std::uint32_t> exact_seq_search(net::Ipv4Addr collider, std::uint16_t port,
                                              std::uint32_t seq_in_window,
                                              std::uint32_t ack_challenge);
  std::uint16_t random_port();
  std::uint32_t random_u32();

  net::Network& net_;
  AttackConfig cfg_;
  net::Rng rng_;
  AttackerHost host_;
  net::HostId id_;
  Prober prober_;
  AttackReport report_;
  PhaseHook hook_;
  bool halted_ = false;

  // Current phase bookkeeping.
  PhaseRecord current_;
  net::SimTime phase_deadline_ = 0;
  std::uint64_t packets_at_start_ = 0;
};

}  // namespace offpath::attack
