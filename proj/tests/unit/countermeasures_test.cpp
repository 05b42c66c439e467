#include <gtest/gtest.h>

#include "offpath/contract.hpp"
#include "offpath/defense/ipid_policies.hpp"
#include "offpath/victim/host.hpp"

using namespace offpath;
using namespace offpath::victim;

namespace {

const net::Ipv4Addr kServer(10, 0, 0, 1), kClient(10, 1, 0, 2);

PacketMeta tcp_meta(bool df) {
  PacketMeta m;
  m.protocol = net::IpProto::Tcp;
  m.df = df;
  m.src = kServer;
  m.dst = kClient;
  m.socket = 4;
  return m;
}

}  // namespace

TEST(ProtocolField, TcpWithDfClearUsesSocketCounter) {
  IpidCounters c(SipKey{1, 2}, 3);
  c.forbid_tcp_hash_access(true);
  auto a = defense::assign_ipid(c, IpidPolicy::ProtocolFieldBased, tcp_meta(false), 10, 40);
  auto b = defense::assign_ipid(c, IpidPolicy::ProtocolFieldBased, tcp_meta(false), 900, 3600);
  EXPECT_EQ(static_cast<std::uint16_t>(b - a), 1);
  EXPECT_EQ(c.stats().hash_draws_tcp, 0u);
  EXPECT_EQ(c.stats().socket_draws, 2u);
}

TEST(ProtocolField, IcmpStillUsesHashCounter) {
  IpidCounters c(SipKey{1, 2}, 3);
  PacketMeta m;
  m.protocol = net::IpProto::Icmp;
  m.src = kServer;
  m.dst = kClient;
  defense::assign_ipid(c, IpidPolicy::ProtocolFieldBased, m, 10, 40);
  EXPECT_EQ(c.stats().hash_draws_other, 1u);
}

TEST(ProtocolField, ZeroRulesRetained) {
  IpidCounters c(SipKey{1, 2}, 3);
  auto m = tcp_meta(false);
  m.is_synack = true;
  EXPECT_EQ(defense::assign_ipid(c, IpidPolicy::ProtocolFieldBased, m, 1, 4), 0);
  m.is_synack = false;
  m.is_rst = true;
  m.socket.reset();
  EXPECT_EQ(defense::assign_ipid(c, IpidPolicy::ProtocolFieldBased, m, 1, 4), 0);
}

TEST(ProtocolField, SocketlessTcpFallsBackToDestinationCounter) {
  IpidCounters c(SipKey{1, 2}, 3);
  c.forbid_tcp_hash_access(true);
  auto m = tcp_meta(false);
  m.socket.reset();
  auto a = defense::assign_ipid(c, IpidPolicy::ProtocolFieldBased, m, 1, 4);
  auto b = defense::assign_ipid(c, IpidPolicy::ProtocolFieldBased, m, 2, 8);
  EXPECT_EQ(static_cast<std::uint16_t>(b - a), 1);
  EXPECT_EQ(c.stats().destination_draws, 2u);
}

TEST(ProtocolField, StructuralAssertionFires) {
  IpidCounters c(SipKey{1, 2}, 3);
  c.forbid_tcp_hash_access(true);
  // The unpatched assigner on a patched host trips the guard.
  EXPECT_THROW(assign_ipid_mixed(c, tcp_meta(false), 1), ContractViolation);
}

TEST(RstDestination, LiveConnectionUsesItsSocketCounter) {
  IpidCounters c(SipKey{1, 2}, 3);
  auto data = tcp_meta(true);
  auto first = defense::assign_ipid(c, IpidPolicy::RstDestinationCounter, data, 1, 4);
  PacketMeta rst = tcp_meta(true);
  rst.is_rst = true;
  rst.socket.reset();
  rst.peer_socket = 4;
  auto r = defense::assign_ipid(c, IpidPolicy::RstDestinationCounter, rst, 2, 8);
  EXPECT_EQ(r, static_cast<std::uint16_t>(first + 1));
  EXPECT_NE(r, 0);
}

TEST(RstDestination, UnknownDestinationGetsPrivateCounter) {
  IpidCounters c(SipKey{1, 2}, 3);
  PacketMeta rst = tcp_meta(true);
  rst.is_rst = true;
  rst.socket.reset();
  auto a = defense::assign_ipid(c, IpidPolicy::RstDestinationCounter, rst, 1, 4);
  auto b = defense::assign_ipid(c, IpidPolicy::RstDestinationCounter, rst, 1, 4);
  EXPECT_EQ(static_cast<std::uint16_t>(b - a), 1);
  EXPECT_EQ(c.stats().hash_draws_tcp, 0u);
  EXPECT_EQ(c.destination_counter_count(), 1u);
}

TEST(RstDestination, IdleCountersAreCollected) {
  IpidCounters c(SipKey{1, 2}, 3);
  c.set_destination_idle_ms(60'000);
  PacketMeta rst = tcp_meta(true);
  rst.is_rst = true;
  rst.socket.reset();
  defense::assign_ipid(c, IpidPolicy::RstDestinationCounter, rst, 1, 1000);
  rst.dst = net::Ipv4Addr(10, 1, 0, 3);
  defense::assign_ipid(c, IpidPolicy::RstDestinationCounter, rst, 1, 70'000);
  EXPECT_FALSE(c.destination_counter(kClient).has_value());
  EXPECT_TRUE(c.destination_counter(rst.dst).has_value());
}

TEST(RstDestination, OnlyAppliesToRst) {
  IpidCounters c(SipKey{1, 2}, 3);
  EXPECT_THROW(defense::assign_ipid_rst_dest_counter(c, tcp_meta(true), 1, 4, false), ContractViolation);
}

namespace {


// Connect, exchange data and record what each side's application saw.
std::pair<std::string, std::string> benign_exchange(IpidPolicy policy) {
  net::Network net(6);
  HostConfig sc{"server", {kServer}, policy};
  sc.endpoint.listening_ports = {22};
  HostConfig cc{"client", {kClient}, policy};
  LinuxHost server(sc, 6), client(cc, 7);
  auto sid = server.attach(net);
  auto cid = client.attach(net);
  net.set_link(sid, cid, net::LinkModel{20, 0.0, false});
  auto tuple = *client.connect(net, kServer, 22);
  net.run_until(200);
  client.send(net, tuple, std::string(3000, 'c'));
  FourTuple st{kServer, 22, kClient, tuple.local_port};
  server.send(net, st, "banner");
  net.run_until(2000);
  return {server.tcp().app_received(st), client.tcp().app_received(tuple)};
}

}  // namespace

TEST(PatchedPolicies, BenignTransferUnchanged) {
  auto base = benign_exchange(IpidPolicy::MixedDfBased);
  EXPECT_EQ(base.first.size(), 3000u);
  EXPECT_EQ(base.second, "banner");
  for (auto p : {IpidPolicy::ProtocolFieldBased, IpidPolicy::RstDestinationCounter,
                 IpidPolicy::ProtocolFieldWithRstDestination})
    EXPECT_EQ(benign_exchange(p), base) << to_string(p);
}

TEST(PatchedPolicies, NamesRoundTrip) {
  for (auto p : {IpidPolicy::MixedDfBased, IpidPolicy::ProtocolFieldBased,
                 IpidPolicy::RstDestinationCounter, IpidPolicy::ProtocolFieldWithRstDestination})
    EXPECT_EQ(parse_policy(to_string(p)), p);
  EXPECT_FALSE(parse_policy("Bogus"));
}
