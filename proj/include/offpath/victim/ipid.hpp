#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>

#include "offpath/net/address.hpp"
#include "offpath/net/packet.hpp"
#include "offpath/net/rng.hpp"
#include "offpath/net/time.hpp"
#include "offpath/victim/siphash.hpp"

namespace offpath::victim {

inline constexpr std::size_t kHashCounterCount = 2048;

using SocketId = std::uint64_t;

enum class IpidPolicy {
  MixedDfBased,
  ProtocolFieldBased,
  RstDestinationCounter,
  // Both patches deployed together.
  ProtocolFieldWithRstDestination,
};

const char* to_string(IpidPolicy policy);
std::optional<IpidPolicy> parse_policy(std::string_view name);

// Everything the assigner may look at when choosing an IPID.
struct PacketMeta {
  bool is_rst = false;
  bool is_synack = false;
  bool df = false;
  net::IpProto protocol = net::IpProto::Tcp;
  net::Ipv4Addr src;
  net::Ipv4Addr dst;
  // Socket the packet is sent from, if any.
  std::optional<SocketId> socket;
  // For socketless TCP replies: a live connection to the same destination.
  std::optional<SocketId> peer_socket;
};

// Keyed hash of (src, dst, protocol); the counter index is this modulo the
// table size.
std::uint64_t flow_hash(net::Ipv4Addr src, net::Ipv4Addr dst, net::IpProto protocol,
                        const SipKey& key);
std::size_t hash_counter_index(net::Ipv4Addr src, net::Ipv4Addr dst, net::IpProto protocol,
                               const SipKey& key);

struct HashCounter {
  std::uint16_t value = 0;
  std::int64_t last_used_tick = 0;
};

struct IpidStats {
  std::uint64_t hash_draws_tcp = 0;
  std::uint64_t hash_draws_other = 0;
  std::uint64_t socket_draws = 0;
  std::uint64_t destination_draws = 0;
  std::uint64_t zero_assignments = 0;
};

// The host's counter bank: 2048 shared hash counters, per-socket counters and
// per-destination counters.
class IpidCounters {
 public:
  IpidCounters(SipKey boot_key, std::uint64_t seed);

  const SipKey& boot_key() const { return boot_key_; }
  std::size_t index_for(net::Ipv4Addr src, net::Ipv4Addr dst, net::IpProto protocol) const {
    return hash_counter_index(src, dst, protocol, boot_key_);
  }

  // Returns the counter's value, then advances it by uniform(1, max(1, ticks
  // since last use)).
  std::uint16_t draw_hash(std::size_t index, std::int64_t now_tick, net::IpProto protocol);
  // Returns the socket's value, then advances it by exactly one.
  std::uint16_t draw_socket(SocketId socket);
  std::uint16_t draw_destination(net::Ipv4Addr dst, net::SimTime now_ms);
  std::uint16_t assign_zero() {
    ++stats_.zero_assignments;
    return 0;
  }

  void release_socket(SocketId socket) { sockets_.erase(socket); }

  const HashCounter& hash_counter(std::size_t index) const { return hash_.at(index); }
  std::optional<std::uint16_t> socket_counter(SocketId socket) const;
  std::optional<std::uint16_t> destination_counter(net::Ipv4Addr dst) const;
  std::size_t destination_counter_count() const { return destinations_.size(); }

  void set_destination_idle_ms(net::SimTime idle) { destination_idle_ms_ = idle; }
  // When set, a TCP packet reaching a hash counter is a contract violation.
  void forbid_tcp_hash_access(bool forbid) { forbid_tcp_hash_ = forbid; }

  const IpidStats& stats() const { return stats_; }

 private:
  struct DestinationCounter {
    std::uint16_t value = 0;
    net::SimTime last_used_ms = 0;
  };

  void collect_idle_destinations(net::SimTime now_ms);

  SipKey boot_key_;
  net::Rng rng_;
  std::array<HashCounter, kHashCounterCount> hash_{};
  std::unordered_map<SocketId, std::uint16_t> sockets_;
  std::unordered_map<net::Ipv4Addr, DestinationCounter> destinations_;
  net::SimTime destination_idle_ms_ = 60'000;
  net::SimTime last_collection_ms_ = 0;
  bool forbid_tcp_hash_ = false;
  IpidStats stats_;
};

// The stock Linux assignment: RST gets 0, DF-clear packets use a hash
// counter, DF SYN/ACKs get 0, other DF packets use their socket's counter.
std::uint16_t assign_ipid_mixed(IpidCounters& counters, const PacketMeta& meta,
                                std::int64_t now_tick);

}  // namespace offpath::victim
