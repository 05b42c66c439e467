#include "offpath/defense/ipid_policies.hpp"

#include "offpath/contract.hpp"

namespace offpath::defense {

using victim::IpidCounters;
using victim::IpidPolicy;
using victim::PacketMeta;

std::uint16_t assign_ipid_protocol_field(IpidCounters& counters, const PacketMeta& meta,
                                         std::int64_t now_tick, net::SimTime now_ms) {
  if (meta.protocol != net::IpProto::Tcp) return victim::assign_ipid_mixed(counters, meta, now_tick);
  if (meta.is_rst || meta.is_synack) return counters.assign_zero();
  if (meta.socket) return counters.draw_socket(*meta.socket);
  return counters.draw_destination(meta.dst, now_ms);
}

std::uint16_t assign_ipid_rst_dest_counter(IpidCounters& counters, const PacketMeta& meta,
                                           std::int64_t now_tick, net::SimTime now_ms,
                                           bool tcp_uses_sockets_only) {
  expects(meta.is_rst, "destination-counter policy applies to RST only");
  auto owner = meta.socket ? meta.socket : meta.peer_socket;
  if (!owner) return counters.draw_destination(meta.dst, now_ms);
  // Use whatever counter the connection's own packets use right now.
  if (!tcp_uses_sockets_only && !meta.df) {
    auto index = counters.index_for(meta.src, meta.dst, meta.protocol);
    return counters.draw_hash(index, now_tick, meta.protocol);
  }
  return counters.draw_socket(*owner);
}

std::uint16_t assign_ipid(IpidCounters& counters, IpidPolicy policy, const PacketMeta& meta,
                          std::int64_t now_tick, net::SimTime now_ms) {
  bool tcp_rst = meta.is_rst && meta.protocol == net::IpProto::Tcp;
  switch (policy) {
    case IpidPolicy::MixedDfBased:
      return victim::assign_ipid_mixed(counters, meta, now_tick);
    case IpidPolicy::ProtocolFieldBased:
      return assign_ipid_protocol_field(counters, meta, now_tick, now_ms);
    case IpidPolicy::RstDestinationCounter:
      if (tcp_rst) return assign_ipid_rst_dest_counter(counters, meta, now_tick, now_ms, false);
      return victim::assign_ipid_mixed(counters, meta, now_tick);
    case IpidPolicy::ProtocolFieldWithRstDestination:
      if (tcp_rst) return assign_ipid_rst_dest_counter(counters, meta, now_tick, now_ms, true);
      return assign_ipid_protocol_field(counters, meta, now_tick, now_ms);
  }
  return 0;
}

}  // namespace offpath::defense
