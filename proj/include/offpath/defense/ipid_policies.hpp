#pragma once

#include <cstdint>

#include "offpath/victim/ipid.hpp"

namespace offpath::defense {

// Patch 1: TCP never uses a hash counter, whatever the DF flag says.
std::uint16_t assign_ipid_protocol_field(victim::IpidCounters& counters,
                                         const victim::PacketMeta& meta, std::int64_t now_tick,
                                         net::SimTime now_ms);

// Patch 2: a RST draws from the counter of a live connection to its
// destination, or from a private per-destination counter.
std::uint16_t assign_ipid_rst_dest_counter(victim::IpidCounters& counters,
                                           const victim::PacketMeta& meta,
                                           std::int64_t now_tick, net::SimTime now_ms,
                                           bool tcp_uses_sockets_only);

// Dispatches on the active policy.
std::uint16_t assign_ipid(victim::IpidCounters& counters, victim::IpidPolicy policy,
                          const victim::PacketMeta& meta, std::int64_t now_tick,
                          net::SimTime now_ms);

}  // namespace offpath::defense
