#include "offpath/victim/ipid.hpp"

#include <algorithm>
#include <string_view>

#include "offpath/contract.hpp"

namespace offpath::victim {

const char* to_string(IpidPolicy policy) {
  switch (policy) {
    case IpidPolicy::MixedDfBased: return "MixedDfBased";
    case IpidPolicy::ProtocolFieldBased: return "ProtocolFieldBased";
    case IpidPolicy::RstDestinationCounter: return "RstDestinationCounter";
    case IpidPolicy::ProtocolFieldWithRstDestination: return "ProtocolFieldWithRstDestination";
  }
  return "?";
}

std::optional<IpidPolicy> parse_policy(std::string_view name) {
  for (auto p : {IpidPolicy::MixedDfBased, IpidPolicy::ProtocolFieldBased,
                 IpidPolicy::RstDestinationCounter, IpidPolicy::ProtocolFieldWithRstDestination}) {
    if (name == to_string(p)) return p;
  }
  return std::nullopt;
}

std::uint64_t flow_hash(net::Ipv4Addr src, net::Ipv4Addr dst, net::IpProto protocol,
                        const SipKey& key) {
  std::array<std::uint8_t, 9> buf{};
  for (int i = 0; i < 4; ++i) {
    buf[i] = static_cast<std::uint8_t>(src.value >> (24 - 8 * i));
    buf[4 + i] = static_cast<std::uint8_t>(dst.value >> (24 - 8 * i));
  }
  buf[8] = static_cast<std::uint8_t>(protocol);
  return siphash24(key, buf);
}

std::size_t hash_counter_index(net::Ipv4Addr src, net::Ipv4Addr dst, net::IpProto protocol,
                               const SipKey& key) {
  return static_cast<std::size_t>(flow_hash(src, dst, protocol, key) % kHashCounterCount);
}

IpidCounters::IpidCounters(SipKey boot_key, std::uint64_t seed) : boot_key_(boot_key), rng_(seed) {
  for (auto& c : hash_) c.value = static_cast<std::uint16_t>(rng_.uniform(0, 0xffff));
}

std::uint16_t IpidCounters::draw_hash(std::size_t index, std::int64_t now_tick,
                                      net::IpProto protocol) {
  expects(index < kHashCounterCount, "hash counter index out of range");
  if (protocol == net::IpProto::Tcp) {
    expects(!forbid_tcp_hash_, "TCP packet reached a shared hash counter");
    ++stats_.hash_draws_tcp;
  } else {
    ++stats_.hash_draws_other;
  }
  auto& c = hash_[index];
  std::uint16_t out = c.value;
  std::int64_t elapsed = std::max<std::int64_t>(1, now_tick - c.last_used_tick);
  c.value = static_cast<std::uint16_t>(c.value + rng_.uniform(1, static_cast<std::uint64_t>(elapsed)));
  c.last_used_tick = now_tick;
  return out;
}

std::uint16_t IpidCounters::draw_socket(SocketId socket) {
  ++stats_.socket_draws;
  auto it = sockets_.find(socket);
  if (it == sockets_.end())
    it = sockets_.emplace(socket, static_cast<std::uint16_t>(rng_.uniform(0, 0xffff))).first;
  return it->second++;
}

std::uint16_t IpidCounters::draw_destination(net::Ipv4Addr dst, net::SimTime now_ms) {
  ++stats_.destination_draws;
  collect_idle_destinations(now_ms);
  auto it = destinations_.find(dst);
  if (it == destinations_.end()) {
    auto init = static_cast<std::uint16_t>(rng_.uniform(0, 0xffff));
    it = destinations_.emplace(dst, DestinationCounter{init, now_ms}).first;
  }
  it->second.last_used_ms = now_ms;
  return it->second.value++;
}

void IpidCounters::collect_idle_destinations(net::SimTime now_ms) {
  if (now_ms - last_collection_ms_ < 1000) return;
  last_collection_ms_ = now_ms;
  std::erase_if(destinations_, [&](const auto& kv) {
    return now_ms - kv.second.last_used_ms > destination_idle_ms_;
  });
}

std::optional<std::uint16_t> IpidCounters::socket_counter(SocketId socket) const {
  auto it = sockets_.find(socket);
  if (it == sockets_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint16_t> IpidCounters::destination_counter(net::Ipv4Addr dst) const {
  auto it = destinations_.find(dst);
  if (it == destinations_.end()) return std::nullopt;
  return it->second.value;
}

std::uint16_t assign_ipid_mixed(IpidCounters& counters, const PacketMeta& meta,
                                std::int64_t now_tick) {
  if (meta.is_rst) return counters.assign_zero();
  if (!meta.df) {
    auto index = counters.index_for(meta.src, meta.dst, meta.protocol);
    return counters.draw_hash(index, now_tick, meta.protocol);
  }
  if (meta.is_synack) return counters.assign_zero();
  expects(meta.socket.has_value(), "DF packet without a socket");
  return counters.draw_socket(*meta.socket);
}

}  // namespace offpath::victim
