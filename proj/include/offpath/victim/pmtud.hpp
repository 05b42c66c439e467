#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <span>
#include <tuple>
#include <unordered_map>

#include "offpath/net/address.hpp"
#include "offpath/net/packet.hpp"

namespace offpath::victim {

inline constexpr std::uint16_t kLinuxMinPmtu = 552;

struct PmtudConfig {
  std::uint16_t min_pmtu = kLinuxMinPmtu;
  // Require the quoted packet to be an echo reply this host really sent.
  bool validate_embedded_provenance = false;
  std::uint16_t interface_mtu = 1500;
};

struct RouteCacheEntry {
  net::Ipv4Addr dst;
  std::uint16_t pmtu = 1500;
  bool df_cleared = false;
};

class RouteCache {
 public:
  explicit RouteCache(std::uint16_t interface_mtu = 1500) : interface_mtu_(interface_mtu) {}

  const RouteCacheEntry* find(net::Ipv4Addr dst) const;
  RouteCacheEntry& entry(net::Ipv4Addr dst);

  std::uint16_t pmtu(net::Ipv4Addr dst) const;
  bool df_for(net::Ipv4Addr dst) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::uint16_t interface_mtu_;
  std::unordered_map<net::Ipv4Addr, RouteCacheEntry> entries_;
};

// Bounded record of echo replies this host sent, for strict validation.
class EchoReplyLog {
 public:
  explicit EchoReplyLog(std::size_t capacity = 4096) : capacity_(capacity) {}

  void record(net::Ipv4Addr src, net::Ipv4Addr dst, std::uint16_t id, std::uint16_t seqno);
  bool contains(net::Ipv4Addr src, net::Ipv4Addr dst, std::uint16_t id,
                std::uint16_t seqno) const;

 private:
  using Key = std::tuple<std::uint32_t, std::uint32_t, std::uint16_t, std::uint16_t>;
  std::size_t capacity_;
  std::deque<Key> order_;
  std::multiset<Key> keys_;
};

bool embedded_check(std::span<const std::uint8_t> embedded, const PmtudConfig& cfg,
                    const EchoReplyLog& log);

enum class FragOutcome { DfCleared, PmtuUpdated, Ignored, Rejected };

const char* to_string(FragOutcome outcome);

// Applies a Fragmentation Needed message to the route of the quoted packet's
// destination.
FragOutcome handle_frag_needed(const net::FragNeeded& msg, const PmtudConfig& cfg,
                               const EchoReplyLog& log, RouteCache& routes);

}  // namespace offpath::victim
