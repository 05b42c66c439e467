#include "offpath/net/packet.hpp"

#include <fmt/format.h>

#include "offpath/contract.hpp"

namespace offpath::net {

namespace {

constexpr std::uint16_t kIpHeaderLen = 20;
constexpr std::uint16_t kTcpHeaderLen = 20;
constexpr std::uint16_t kIcmpHeaderLen = 8;

constexpr std::uint8_t kIcmpEchoReply = 0;
constexpr std::uint8_t kIcmpUnreachable = 3;
constexpr std::uint8_t kIcmpEchoRequest = 8;

void put16(std::vector<std::uint8_t>& out, std::size_t at, std::uint16_t v) {
  out[at] = static_cast<std::uint8_t>(v >> 8);
  out[at + 1] = static_cast<std::uint8_t>(v);
}

void put32(std::vector<std::uint8_t>& out, std::size_t at, std::uint32_t v) {
  put16(out, at, static_cast<std::uint16_t>(v >> 16));
  put16(out, at + 2, static_cast<std::uint16_t>(v));
}

std::uint16_t get16(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<std::uint16_t>((in[at] << 8) | in[at + 1]);
}

std::uint32_t get32(std::span<const std::uint8_t> in, std::size_t at) {
  return (std::uint32_t{get16(in, at)} << 16) | get16(in, at + 2);
}

std::uint16_t checksum(const std::vector<std::uint8_t>& data, std::size_t from, std::size_t len) {
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i + 1 < len; i += 2) sum += (data[from + i] << 8) | data[from + i + 1];
  if (len % 2) sum += data[from + len - 1] << 8;
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

std::uint16_t icmp_length(const IcmpMessage& msg) {
  if (auto* f = std::get_if<FragNeeded>(&msg))
    return static_cast<std::uint16_t>(kIcmpHeaderLen + f->embedded.size());
  return kIcmpHeaderLen;
}

}  // namespace

std::string TcpFlags::to_string() const {
  std::string out;
  if (has(TcpFlag::Syn)) out += 'S';
  if (has(TcpFlag::Fin)) out += 'F';
  if (has(TcpFlag::Rst)) out += 'R';
  if (has(TcpFlag::Psh)) out += 'P';
  if (has(TcpFlag::Ack)) out += '.';
  if (out.empty()) out = "none";
  return out;
}

Packet make_tcp_packet(Ipv4Addr src, Ipv4Addr dst, TcpSegment seg, bool df) {
  expects(!(seg.flags.rst() && !seg.payload.empty()), "RST segment must not carry payload");
  Packet p;
  p.ip.src = src;
  p.ip.dst = dst;
  p.ip.df = df;
  p.ip.protocol = IpProto::Tcp;
  p.ip.total_length = static_cast<std::uint16_t>(kIpHeaderLen + kTcpHeaderLen + seg.payload.size());
  p.body = std::move(seg);
  return p;
}

Packet make_icmp_packet(Ipv4Addr src, Ipv4Addr dst, IcmpMessage msg) {
  Packet p;
  p.ip.src = src;
  p.ip.dst = dst;
  p.ip.df = false;
  p.ip.protocol = IpProto::Icmp;
  p.ip.total_length = static_cast<std::uint16_t>(kIpHeaderLen + icmp_length(msg));
  p.body = std::move(msg);
  return p;
}

FragNeeded make_frag_needed(std::uint16_t next_hop_mtu, std::vector<std::uint8_t> embedded) {
  expects(embedded.size() <= kMaxEmbeddedOctets, "embedded data exceeds 576 octets");
  return FragNeeded{next_hop_mtu, std::move(embedded)};
}

std::vector<std::uint8_t> header_image(const Packet& pkt) {
  std::vector<std::uint8_t> out(kIpHeaderLen + 8, 0);
  out[0] = 0x45;
  put16(out, 2, pkt.ip.total_length);
  put16(out, 4, pkt.ip.ipid);
  out[6] = pkt.ip.df ? 0x40 : 0x00;
  out[8] = 64;
  out[9] = static_cast<std::uint8_t>(pkt.ip.protocol);
  put32(out, 12, pkt.ip.src.value);
  put32(out, 16, pkt.ip.dst.value);
  put16(out, 10, checksum(out, 0, kIpHeaderLen));

  if (const auto* seg = pkt.tcp()) {
    put16(out, 20, seg->sport);
    put16(out, 22, seg->dport);
    put32(out, 24, seg->seq);
  } else if (const auto* icmp = pkt.icmp()) {
    if (const auto* e = std::get_if<EchoRequest>(icmp)) {
      out[20] = kIcmpEchoRequest;
      put16(out, 24, e->id);
      put16(out, 26, e->seqno);
    } else if (const auto* r = std::get_if<EchoReply>(icmp)) {
      out[20] = kIcmpEchoReply;
      put16(out, 24, r->id);
      put16(out, 26, r->seqno);
    } else {
      out[20] = kIcmpUnreachable;
      out[21] = 4;
    }
    put16(out, 22, checksum(out, 20, 8));
  }
  return out;
}

std::optional<QuotedHeader> parse_header_image(std::span<const std::uint8_t> image) {
  if (image.size() < kIpHeaderLen + 8) return std::nullopt;
  if (image[0] != 0x45) return std::nullopt;
  QuotedHeader q;
  q.ipid = get16(image, 4);
  q.protocol = image[9];
  q.src = Ipv4Addr{get32(image, 12)};
  q.dst = Ipv4Addr{get32(image, 16)};
  if (q.protocol == static_cast<std::uint8_t>(IpProto::Icmp)) {
    q.icmp_type = image[20];
    q.icmp_id = get16(image, 24);
    q.icmp_seqno = get16(image, 26);
  } else if (q.protocol == static_cast<std::uint8_t>(IpProto::Tcp)) {
    q.sport = get16(image, 20);
    q.dport = get16(image, 22);
  }
  return q;
}

std::string Packet::summary() const {
  std::string head = fmt::format("{} > {} id={}{}", ip.src.to_string(), ip.dst.to_string(), ip.ipid,
                                 ip.df ? " DF" : "");
  if (const auto* seg = tcp()) {
    return fmt::format("{} TCP {}>{} [{}] seq={} ack={} win={} len={}", head, seg->sport, seg->dport,
                       seg->flags.to_string(), seg->seq, seg->ack, seg->window,
                       seg->payload.size());
  }
  const auto& msg = *icmp();
  if (const auto* e = std::get_if<EchoRequest>(&msg))
    return fmt::format("{} ICMP echo-request id={} seq={}", head, e->id, e->seqno);
  if (const auto* r = std::get_if<EchoReply>(&msg))
    return fmt::format("{} ICMP echo-reply id={} seq={}", head, r->id, r->seqno);
  const auto& f = std::get<FragNeeded>(msg);
  return fmt::format("{} ICMP frag-needed mtu={} embedded={}", head, f.next_hop_mtu,
                     f.embedded.size());
}

}  // namespace offpath::net
