#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "offpath/net/address.hpp"

namespace offpath::net {

enum class IpProto : std::uint8_t { Icmp = 1, Tcp = 6 };

enum class TcpFlag : std::uint8_t { Fin = 0x01, Syn = 0x02, Rst = 0x04, Psh = 0x08, Ack = 0x10 };

class TcpFlags {
 public:
  constexpr TcpFlags() = default;
  constexpr TcpFlags(std::initializer_list<TcpFlag> flags) {
    for (auto f : flags) bits_ |= static_cast<std::uint8_t>(f);
  }

  constexpr bool has(TcpFlag f) const { return (bits_ & static_cast<std::uint8_t>(f)) != 0; }
  constexpr bool syn() const { return has(TcpFlag::Syn); }
  constexpr bool ack() const { return has(TcpFlag::Ack); }
  constexpr bool rst() const { return has(TcpFlag::Rst); }
  constexpr bool synack() const { return syn() && ack(); }
  constexpr std::uint8_t bits() const { return bits_; }

  friend constexpr bool operator==(TcpFlags, TcpFlags) = default;

  // tcpdump-style letters, e.g. "S.", "R", "P.".
  std::string to_string() const;

 private:
  std::uint8_t bits_ = 0;
};

struct TcpSegment {
  std::uint16_t sport = 0;
  std::uint16_t dport = 0;
  std::uint32_t seq = 0;
  std::uint32_t ack = 0;
  TcpFlags flags;
  std::uint16_t window = 0;
  std::string payload;

  std::size_t payload_len() const { return payload.size(); }
};

struct EchoRequest {
  std::uint16_t id = 0;
  std::uint16_t seqno = 0;
};

struct EchoReply {
  std::uint16_t id = 0;
  std::uint16_t seqno = 0;
};

inline constexpr std::size_t kMinEmbeddedOctets = 28;
inline constexpr std::size_t kMaxEmbeddedOctets = 576;

// ICMP type 3 code 4. `embedded` is a raw image of the triggering packet.
struct FragNeeded {
  std::uint16_t next_hop_mtu = 0;
  std::vector<std::uint8_t> embedded;
};

using IcmpMessage = std::variant<EchoRequest, EchoReply, FragNeeded>;

struct Ipv4Header {
  Ipv4Addr src;
  Ipv4Addr dst;
  std::uint16_t ipid = 0;
  bool df = false;
  IpProto protocol = IpProto::Tcp;
  std::uint16_t total_length = 0;
};

struct Packet {
  Ipv4Header ip;
  std::variant<TcpSegment, IcmpMessage> body;

  const TcpSegment* tcp() const { return std::get_if<TcpSegment>(&body); }
  const IcmpMessage* icmp() const { return std::get_if<IcmpMessage>(&body); }

  std::string summary() const;
};

Packet make_tcp_packet(Ipv4Addr src, Ipv4Addr dst, TcpSegment seg, bool df = true);
Packet make_icmp_packet(Ipv4Addr src, Ipv4Addr dst, IcmpMessage msg);
FragNeeded make_frag_needed(std::uint16_t next_hop_mtu, std::vector<std::uint8_t> embedded);

// Wire image of the IPv4 header plus the first 8 octets of the transport
// header: exactly what an ICMP error quotes.
std::vector<std::uint8_t> header_image(const Packet& pkt);

struct QuotedHeader {
  Ipv4Addr src;
  Ipv4Addr dst;
  std::uint8_t protocol = 0;
  std::uint16_t ipid = 0;
  // First 8 transport octets, decoded for the two protocols we know.
  std::uint8_t icmp_type = 0;
  std::uint16_t icmp_id = 0;
  std::uint16_t icmp_seqno = 0;
  std::uint16_t sport = 0;
  std::uint16_t dport = 0;
};

std::optional<QuotedHeader> parse_header_image(std::span<const std::uint8_t> image);

}  // namespace offpath::net
