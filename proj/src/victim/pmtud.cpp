#include "offpath/victim/pmtud.hpp"

#include <algorithm>

namespace offpath::victim {

const RouteCacheEntry* RouteCache::find(net::Ipv4Addr dst) const {
  auto it = entries_.find(dst);
  return it == entries_.end() ? nullptr : &it->second;
}

RouteCacheEntry& RouteCache::entry(net::Ipv4Addr dst) {
  auto it = entries_.find(dst);
  if (it == entries_.end()) it = entries_.emplace(dst, RouteCacheEntry{dst, interface_mtu_, false}).first;
  return it->second;
}

std::uint16_t RouteCache::pmtu(net::Ipv4Addr dst) const {
  const auto* e = find(dst);
  return e ? e->pmtu : interface_mtu_;
}

bool RouteCache::df_for(net::Ipv4Addr dst) const {
  const auto* e = find(dst);
  return !(e && e->df_cleared);
}

void EchoReplyLog::record(net::Ipv4Addr src, net::Ipv4Addr dst, std::uint16_t id,
                          std::uint16_t seqno) {
  Key k{src.value, dst.value, id, seqno};
  order_.push_back(k);
  keys_.insert(k);
  if (order_.size() > capacity_) {
    keys_.erase(keys_.find(order_.front()));
    order_.pop_front();
  }
}

bool EchoReplyLog::contains(net::Ipv4Addr src, net::Ipv4Addr dst, std::uint16_t id,
                            std::uint16_t seqno) const {
  return keys_.count(Key{src.value, dst.value, id, seqno}) > 0;
}

bool embedded_check(std::span<const std::uint8_t> embedded, const PmtudConfig& cfg,
                    const EchoReplyLog& log) {
  if (embedded.size() < net::kMinEmbeddedOctets) return false;
  if (!cfg.validate_embedded_provenance) return true;
  auto q = net::parse_header_image(embedded);
  if (!q || q->protocol != static_cast<std::uint8_t>(net::IpProto::Icmp) || q->icmp_type != 0)
    return false;
  return log.contains(q->src, q->dst, q->icmp_id, q->icmp_seqno);
}

const char* to_string(FragOutcome outcome) {
  switch (outcome) {
    case FragOutcome::DfCleared: return "df-cleared";
    case FragOutcome::PmtuUpdated: return "pmtu-updated";
    case FragOutcome::Ignored: return "ignored";
    case FragOutcome::Rejected: return "rejected";
  }
  return "?";
}

FragOutcome handle_frag_needed(const net::FragNeeded& msg, const PmtudConfig& cfg,
                               const EchoReplyLog& log, RouteCache& routes) {
  if (!embedded_check(msg.embedded, cfg, log)) return FragOutcome::Rejected;
  auto quoted = net::parse_header_image(msg.embedded);
  if (!quoted) return FragOutcome::Rejected;
  auto& route = routes.entry(quoted->dst);
  if (msg.next_hop_mtu < cfg.min_pmtu) {
    route.pmtu = cfg.min_pmtu;
    route.df_cleared = true;
    return FragOutcome::DfCleared;
  }
  if (msg.next_hop_mtu < route.pmtu) {
    route.pmtu = msg.next_hop_mtu;
    return FragOutcome::PmtuUpdated;
  }
  return FragOutcome::Ignored;
}

}  // namespace offpath::victim
