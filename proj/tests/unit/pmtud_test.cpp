#include <gtest/gtest.h>

#include "offpath/attack/forge.hpp"
#include "offpath/victim/host.hpp"
#include "offpath/victim/pmtud.hpp"

using namespace offpath;
using namespace offpath::victim;

namespace {

const net::Ipv4Addr kServer(10, 0, 0, 1), kClient(10, 1, 0, 2), kRouter(192, 0, 2, 1);

net::FragNeeded frag(std::uint16_t mtu, std::vector<std::uint8_t> embedded) {
  return net::make_frag_needed(mtu, std::move(embedded));
}

}  // namespace

TEST(Pmtud, TinyMtuClearsDf) {
  RouteCache routes;
  EchoReplyLog log;
  auto out = handle_frag_needed(frag(68, attack::echo_reply_image(kServer, kClient, 1, 1)),
                                PmtudConfig{}, log, routes);
  EXPECT_EQ(out, FragOutcome::DfCleared);
  EXPECT_FALSE(routes.df_for(kClient));
  EXPECT_EQ(routes.pmtu(kClient), kLinuxMinPmtu);
  EXPECT_TRUE(routes.df_for(kServer));
}

TEST(Pmtud, MtuAboveMinimumKeepsDf) {
  RouteCache routes;
  EchoReplyLog log;
  auto out = handle_frag_needed(frag(1400, attack::echo_reply_image(kServer, kClient, 1, 1)),
                                PmtudConfig{}, log, routes);
  EXPECT_EQ(out, FragOutcome::PmtuUpdated);
  EXPECT_TRUE(routes.df_for(kClient));
  EXPECT_EQ(routes.pmtu(kClient), 1400);
}

TEST(Pmtud, ShortEmbeddedIsDiscarded) {
  RouteCache routes;
  EchoReplyLog log;
  auto image = attack::echo_reply_image(kServer, kClient, 1, 1);
  image.resize(20);
  EXPECT_EQ(handle_frag_needed(frag(68, image), PmtudConfig{}, log, routes), FragOutcome::Rejected);
  EXPECT_TRUE(routes.df_for(kClient));
  EXPECT_EQ(routes.size(), 0u);
}

TEST(Pmtud, EmbeddedCheckModes) {
  EchoReplyLog log;
  PmtudConfig lax, strict;
  strict.validate_embedded_provenance = true;
  auto image = attack::echo_reply_image(kServer, kClient, 7, 8);
  ASSERT_EQ(image.size(), 28u);
  EXPECT_TRUE(embedded_check(image, lax, log));
  EXPECT_FALSE(embedded_check(image, strict, log));
  log.record(kServer, kClient, 7, 8);
  EXPECT_TRUE(embedded_check(image, strict, log));
  // A different echo id was never sent.
  EXPECT_FALSE(embedded_check(attack::echo_reply_image(kServer, kClient, 7, 9), strict, log));
}

TEST(Pmtud, ReplyLogIsBounded) {
  EchoReplyLog log(2);
  log.record(kServer, kClient, 1, 1);
  log.record(kServer, kClient, 1, 2);
  log.record(kServer, kClient, 1, 3);
  EXPECT_FALSE(log.contains(kServer, kClient, 1, 1));
  EXPECT_TRUE(log.contains(kServer, kClient, 1, 3));
}

namespace {

struct Null : net::Node {
  void on_packet(const net::Packet&, net::Network&) override {}
};

// Attacker that may spoof, server with strict or lax validation.
struct HostBench {
  net::Network net{4};
  LinuxHost server;
  Null attacker, client;
  net::HostId sid, aid, cid;

  explicit HostBench(bool strict) : server(config(strict), 4) {
    sid = server.attach(net);
    aid = net.add_host("attacker", attacker);
    cid = net.add_host("client", client);
    net.assign_address(aid, net::Ipv4Addr(100, 64, 0, 1));
    net.assign_address(cid, kClient);
    net.set_link(aid, sid, net::LinkModel{10, 0.0, true});
    net.set_link(cid, sid, net::LinkModel{10, 0.0, false});
  }
  static HostConfig config(bool strict) {
    HostConfig c{"server", {kServer}};
    c.pmtud.validate_embedded_provenance = strict;
    return c;
  }
  void forge() {
    net.transmit(aid, attack::forge_frag_needed(kRouter, kServer, kClient, attack::kForgedMtu, 3, 4));
    net.run_until(net.now() + 50);
  }
};

}  // namespace

TEST(Pmtud, HostLaxAcceptsSynthetic) {
  HostBench b(false);
  b.forge();
  EXPECT_FALSE(b.server.routes().df_for(kClient));
}

TEST(Pmtud, HostStrictRejectsSynthetic) {
  HostBench b(true);
  b.forge();
  EXPECT_TRUE(b.server.routes().df_for(kClient));
}

TEST(Pmtud, HostStrictAcceptsElicitedReply) {
  HostBench b(true);
  // Spoofed echo request from the client makes the server send the reply it
  // will later find in its log.
  b.net.transmit(b.aid, attack::echo_request(kClient, kServer, 3, 4));
  b.net.run_until(50);
  b.forge();
  EXPECT_FALSE(b.server.routes().df_for(kClient));
}
