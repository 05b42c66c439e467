#include "offpath/victim/host.hpp"

#include <fmt/format.h>

#include "offpath/contract.hpp"
#include "offpath/defense/ipid_policies.hpp"

namespace offpath::victim {

namespace {

SipKey boot_key_from(std::uint64_t seed) {
  net::Rng rng(net::derive_seed(seed, "boot-key"));
  return SipKey{rng.next_u64(), rng.next_u64()};
}

constexpr std::uint64_t kRetransmitToken = ~std::uint64_t{0};

bool rst_policy(IpidPolicy p) {
  return p == IpidPolicy::RstDestinationCounter ||
         p == IpidPolicy::ProtocolFieldWithRstDestination;
}

}  // namespace

LinuxHost::LinuxHost(HostConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      counters_(boot_key_from(seed), net::derive_seed(seed, "ipid")),
      routes_(cfg_.pmtud.interface_mtu),
      tcp_(cfg_.endpoint, net::derive_seed(seed, "tcp")) {
  expects(!cfg_.addresses.empty(), "host needs at least one address");
  expects(cfg_.ipid_tick_ms > 0, "IPID tick must be positive");
  counters_.set_destination_idle_ms(cfg_.destination_counter_idle_ms);
  if (cfg_.policy == IpidPolicy::ProtocolFieldBased ||
      cfg_.policy == IpidPolicy::ProtocolFieldWithRstDestination)
    counters_.forbid_tcp_hash_access(true);
  tcp_.set_mss_source([this](net::Ipv4Addr dst) { return routes_.pmtu(dst); });
  tcp_.set_note_sink([this](std::string_view msg) {
    if (net_ && net_->trace().enabled()) net_->note(id_, msg);
  });
}

net::HostId LinuxHost::attach(net::Network& net) {
  net_ = &net;
  id_ = net.add_host(cfg_.name, *this);
  for (auto a : cfg_.addresses) net.assign_address(id_, a);
  return id_;
}

void LinuxHost::emit(net::Network& net, const std::vector<OutSegment>& segs) {
  for (const auto& o : segs) {
    bool df = routes_.df_for(o.dst);
    net::Packet pkt = net::make_tcp_packet(o.src, o.dst, o.seg, df);
    PacketMeta meta;
    meta.is_rst = o.seg.flags.rst();
    meta.is_synack = o.seg.flags.synack();
    meta.df = df;
    meta.protocol = net::IpProto::Tcp;
    meta.src = o.src;
    meta.dst = o.dst;
    meta.socket = o.socket;
    if (!o.socket && rst_policy(cfg_.policy)) {
      if (const auto* peer = tcp_.find_by_remote(o.dst)) meta.peer_socket = peer->socket_id;
    }
    pkt.ip.ipid = defense::assign_ipid(counters_, cfg_.policy, meta, tick(net.now()), net.now());
    net.transmit(id_, std::move(pkt));
  }
  rearm(net);
}

void LinuxHost::rearm(net::Network& net) {
  auto next = tcp_.next_retransmit();
  if (!next) return;
  // An earlier wakeup is pending and will rearm when it fires.
  if (rto_timer_ && *rto_timer_ <= *next) return;
  rto_timer_ = std::max(*next, net.now());
  net.set_timer(id_, *rto_timer_, kRetransmitToken);
}

void LinuxHost::on_packet(const net::Packet& pkt, net::Network& net) {
  if (const auto* seg = pkt.tcp()) {
    emit(net, tcp_.handle(pkt.ip.src, pkt.ip.dst, *seg, net.now()));
    if (data_hook_) {
      for (auto& [tuple, data] : tcp_.take_deliveries()) data_hook_(tuple, data, net);
    } else {
      tcp_.take_deliveries();
    }
    return;
  }
  handle_icmp(pkt, *pkt.icmp(), net);
}

void LinuxHost::handle_icmp(const net::Packet& pkt, const net::IcmpMessage& msg,
                            net::Network& net) {
  if (const auto* req = std::get_if<net::EchoRequest>(&msg)) {
    net::Packet reply =
        net::make_icmp_packet(pkt.ip.dst, pkt.ip.src, net::EchoReply{req->id, req->seqno});
    PacketMeta meta;
    meta.df = false;
    meta.protocol = net::IpProto::Icmp;
    meta.src = reply.ip.src;
    meta.dst = reply.ip.dst;
    reply.ip.ipid = defense::assign_ipid(counters_, cfg_.policy, meta, tick(net.now()), net.now());
    echo_log_.record(reply.ip.src, reply.ip.dst, req->id, req->seqno);
    net.transmit(id_, std::move(reply));
    return;
  }
  if (const auto* frag = std::get_if<net::FragNeeded>(&msg)) {
    auto outcome = handle_frag_needed(*frag, cfg_.pmtud, echo_log_, routes_);
    if (net.trace().enabled()) {
      auto quoted = net::parse_header_image(frag->embedded);
      net.note(id_, fmt::format("frag-needed mtu={} for {} -> {}", frag->next_hop_mtu,
                                quoted ? quoted->dst.to_string() : std::string("?"),
                                to_string(outcome)));
    }
  }
}

void LinuxHost::on_timer(std::uint64_t token, net::Network& net) {
  if (token == kRetransmitToken) {
    if (rto_timer_ == net.now()) rto_timer_.reset();
    emit(net, tcp_.retransmit_due(net.now()));
    return;
  }
  if (timer_hook_) timer_hook_(token, net);
}

std::optional<FourTuple> LinuxHost::connect(net::Network& net, net::Ipv4Addr remote,
                                            std::uint16_t port) {
  FourTuple tuple;
  emit(net, tcp_.connect(primary_address(), remote, port, net.now(), &tuple));
  return tuple;
}

void LinuxHost::send(net::Network& net, const FourTuple& tuple, std::string data) {
  emit(net, tcp_.send(tuple, std::move(data), net.now()));
}

}  // namespace offpath::victim
