#pragma once

#include <compare>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "offpath/net/address.hpp"
#include "offpath/net/packet.hpp"
#include "offpath/net/rng.hpp"
#include "offpath/net/time.hpp"
#include "offpath/victim/ipid.hpp"

namespace offpath::victim {

inline constexpr std::uint32_t kDefaultRcvWnd = 87380;
inline constexpr std::uint32_t kDefaultSndMaxWnd = 65535;
inline constexpr std::uint16_t kEphemeralLo = 32768;
inline constexpr std::uint16_t kEphemeralHi = 61000;

struct FourTuple {
  net::Ipv4Addr local_addr;
  std::uint16_t local_port = 0;
  net::Ipv4Addr remote_addr;
  std::uint16_t remote_port = 0;

  friend auto operator<=>(const FourTuple&, const FourTuple&) = default;
  std::string to_string() const;
};

enum class TcpPhase { SynSent, SynReceived, Established };

struct TcpConnState {
  FourTuple tuple;
  TcpPhase phase = TcpPhase::Established;
  std::uint32_t rcv_nxt = 0;
  std::uint32_t rcv_wnd = kDefaultRcvWnd;
  std::uint32_t snd_una = 0;
  std::uint32_t snd_nxt = 0;
  std::uint32_t snd_max_wnd = kDefaultSndMaxWnd;
  std::optional<net::SimTime> last_challenge_ack_ms;
  SocketId socket_id = 0;
  net::SimTime created_ms = 0;
  // Application bytes not yet handed to the network.
  std::string send_buffer;
  // Sent but unacknowledged bytes, starting at SND.UNA (after the SYN).
  std::string unacked;
  // Retransmission timer; armed while anything is unacknowledged.
  std::optional<net::SimTime> rto_deadline;
  net::SimTime rto_ms = 0;
  int retransmits = 0;
};

struct EndpointConfig {
  std::set<std::uint16_t> listening_ports;
  bool rst_on_unexpected_synack = true;
  net::SimTime challenge_ack_interval_ms = 500;
  // Zero disables the host-wide limit.
  std::uint32_t global_challenge_ack_per_sec = 1000;
  std::uint32_t rcv_wnd = kDefaultRcvWnd;
  std::uint32_t snd_max_wnd = kDefaultSndMaxWnd;
  net::SimTime half_open_timeout_ms = 3000;
  net::SimTime initial_rto_ms = 1000;
  // Consecutive timeouts before the connection is given up.
  int max_retransmits = 6;
};

// Per-connection interval plus a host-wide budget per one-second epoch.
class ChallengeAckLimiter {
 public:
  ChallengeAckLimiter(net::SimTime interval_ms, std::uint32_t global_per_sec);

  bool permit(TcpConnState& conn, net::SimTime now);

 private:
  net::SimTime interval_ms_;
  std::uint32_t global_per_sec_;
  std::int64_t epoch_ = -1;
  std::uint32_t used_in_epoch_ = 0;
};

enum class SegmentKind { Handshake, Data, PureAck, ChallengeAck, DuplicateAck, Reset };

struct OutSegment {
  net::Ipv4Addr src;
  net::Ipv4Addr dst;
  net::TcpSegment seg;
  SegmentKind kind = SegmentKind::PureAck;
  std::optional<SocketId> socket;
};

struct TcpStats {
  std::uint64_t challenge_acks_sent = 0;
  std::uint64_t challenge_acks_suppressed = 0;
  std::uint64_t duplicate_acks = 0;
  std::uint64_t resets_sent = 0;
  std::uint64_t connections_aborted = 0;
  std::uint64_t dropped = 0;
};

// TCP state machine with a simple retransmission timer (no congestion
// control, no reassembly). Every entry point returns the segments the host
// must emit.
class TcpEndpoint {
 public:
  using MssFn = std::function<std::uint16_t(net::Ipv4Addr)>;
  using NoteFn = std::function<void(std::string_view)>;

  TcpEndpoint(EndpointConfig cfg, std::uint64_t seed);

  void set_mss_source(MssFn fn) { mss_of_ = std::move(fn); }
  void set_note_sink(NoteFn fn) { note_ = std::move(fn); }

  std::vector<OutSegment> handle(net::Ipv4Addr src, net::Ipv4Addr dst,
                                 const net::TcpSegment& seg, net::SimTime now);

  std::vector<OutSegment> connect(net::Ipv4Addr local, net::Ipv4Addr remote,
                                  std::uint16_t remote_port, net::SimTime now,
                                  FourTuple* tuple_out = nullptr);
  std::vector<OutSegment> send(const FourTuple& tuple, std::string data, net::SimTime now);

  // Resends whatever timed out by `now`; the host drives this from a timer.
  std::vector<OutSegment> retransmit_due(net::SimTime now);
  std::optional<net::SimTime> next_retransmit() const;

  const TcpConnState* find(const FourTuple& tuple) const;
  // Any fully established connection with this remote address.
  const TcpConnState* find_by_remote(net::Ipv4Addr remote) const;
  const std::map<FourTuple, TcpConnState>& connections() const { return conns_; }
  std::size_t established_count() const;

  // Test hook: installs a connection as if a handshake had completed.
  TcpConnState& install_established(TcpConnState state);

  // Everything delivered in order to the application on this connection.
  const std::string& app_received(const FourTuple& tuple) const;
  // Deliveries since the last call, for the host's application hook.
  std::vector<std::pair<FourTuple, std::string>> take_deliveries();
  const EndpointConfig& config() const { return cfg_; }
  const TcpStats& stats() const { return stats_; }

 private:
  void expire_half_open(net::SimTime now);
  SocketId next_socket() { return next_socket_id_++; }
  std::uint16_t mss_for(net::Ipv4Addr dst) const;
  OutSegment ack_for(const TcpConnState& c, SegmentKind kind) const;
  void reset_reply(net::Ipv4Addr src, net::Ipv4Addr dst, const net::TcpSegment& seg,
                   std::vector<OutSegment>& out);
  void challenge(TcpConnState& c, net::SimTime now, std::vector<OutSegment>& out,
                 const char* why);
  void flush(TcpConnState& c, std::vector<OutSegment>& out, net::SimTime now);
  void arm(TcpConnState& c, net::SimTime now);
  void acknowledge(TcpConnState& c, std::uint32_t ack);
  void abort(std::map<FourTuple, TcpConnState>::iterator it, const char* why);
  void on_established_segment(TcpConnState& c, const net::TcpSegment& seg, net::SimTime now,
                               std::vector<OutSegment>& out);
  void note(std::string_view msg) const {
    if (note_) note_(msg);
  }

  EndpointConfig cfg_;
  net::Rng rng_;
  ChallengeAckLimiter limiter_;
  std::map<FourTuple, TcpConnState> conns_;
  std::deque<std::pair<net::SimTime, FourTuple>> half_open_;
  std::map<FourTuple, std::string> received_;
  SocketId next_socket_id_ = 1;
  MssFn mss_of_;
  std::vector<std::pair<FourTuple, std::string>> deliveries_;
  NoteFn note_;
  TcpStats stats_;
};

}  // namespace offpath::victim
