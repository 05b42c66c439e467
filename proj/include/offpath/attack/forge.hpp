#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "offpath/net/packet.hpp"

namespace offpath::attack {

enum class EmbeddedSource { SyntheticEchoReply, ElicitedEchoReply };

const char* to_string(EmbeddedSource source);

inline constexpr std::uint16_t kForgedMtu = 68;

net::Packet echo_request(net::Ipv4Addr from, net::Ipv4Addr to, std::uint16_t id,
                         std::uint16_t seqno);

// Image of the echo reply the server would send to the client.
std::vector<std::uint8_t> echo_reply_image(net::Ipv4Addr server, net::Ipv4Addr client,
                                           std::uint16_t id, std::uint16_t seqno);

// A Fragmentation Needed message, sent as if from a router on the path,
// quoting a server-to-client echo reply. Receiving it makes the server clear
// DF towards the client when mtu is below its minimum PMTU.
net::Packet forge_frag_needed(net::Ipv4Addr router, net::Ipv4Addr server, net::Ipv4Addr client,
                              std::uint16_t mtu, std::uint16_t echo_id, std::uint16_t echo_seqno);

// A TCP segment with an arbitrary (usually spoofed) source.
net::Packet spoofed_tcp(net::Ipv4Addr src, std::uint16_t sport, net::Ipv4Addr dst,
                        std::uint16_t dport, std::uint32_t seq, std::uint32_t ack,
                        net::TcpFlags flags, std::string payload = {});

}  // namespace offpath::attack
