#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "offpath/net/simulator.hpp"
#include "offpath/victim/ipid.hpp"
#include "offpath/victim/pmtud.hpp"
#include "offpath/victim/tcp.hpp"

namespace offpath::victim {

struct HostConfig {
  std::string name = "host";
  std::vector<net::Ipv4Addr> addresses;
  IpidPolicy policy = IpidPolicy::MixedDfBased;
  // Length of one IPID clock tick (a jiffy) in virtual ms.
  int ipid_tick_ms = 4;
  PmtudConfig pmtud;
  EndpointConfig endpoint;
  net::SimTime destination_counter_idle_ms = 60'000;
};

// A simulated Linux host: IP output with IPID assignment, PMTUD route cache,
// ICMP echo responder and a TCP endpoint.
class LinuxHost : public net::Node {
 public:
  using DataHook = std::function<void(const FourTuple&, std::string_view, net::Network&)>;
  using TimerHook = std::function<void(std::uint64_t token, net::Network&)>;

  LinuxHost(HostConfig cfg, std::uint64_t seed);

  net::HostId attach(net::Network& net);
  net::HostId id() const { return id_; }
  net::Ipv4Addr primary_address() const { return cfg_.addresses.front(); }

  void on_packet(const net::Packet& pkt, net::Network& net) override;
  void on_timer(std::uint64_t token, net::Network& net) override;

  std::optional<FourTuple> connect(net::Network& net, net::Ipv4Addr remote,
                                   std::uint16_t port);
  void send(net::Network& net, const FourTuple& tuple, std::string data);

  void set_data_hook(DataHook hook) { data_hook_ = std::move(hook); }
  void set_timer_hook(TimerHook hook) { timer_hook_ = std::move(hook); }

  // Ground truth, for the harness and tests. The attacker never holds a host.
  const HostConfig& config() const { return cfg_; }
  const TcpEndpoint& tcp() const { return tcp_; }
  TcpEndpoint& tcp() { return tcp_; }
  const RouteCache& routes() const { return routes_; }
  const IpidCounters& ipid() const { return counters_; }
  IpidCounters& ipid() { return counters_; }
  std::int64_t tick(net::SimTime now) const { return now / cfg_.ipid_tick_ms; }

 private:
  void emit(net::Network& net, const std::vector<OutSegment>& segs);
  void rearm(net::Network& net);
  void handle_icmp(const net::Packet& pkt, const net::IcmpMessage& msg, net::Network& net);

  HostConfig cfg_;
  net::HostId id_{};
  net::Network* net_ = nullptr;
  IpidCounters counters_;
  RouteCache routes_;
  EchoReplyLog echo_log_;
  TcpEndpoint tcp_;
  DataHook data_hook_;
  TimerHook timer_hook_;
  std::optional<net::SimTime> rto_timer_;
};

}  // namespace offpath::victim
