#include <gtest/gtest.h>

#include "offpath/net/rng.hpp"
#include "offpath/victim/tcp.hpp"

using namespace offpath;
using namespace offpath::victim;
using net::TcpFlag;
using net::TcpFlags;

namespace {

const net::Ipv4Addr kServer(10, 0, 0, 1), kClient(10, 1, 0, 2), kAttacker(100, 64, 0, 1);

EndpointConfig server_cfg(bool rst = true) {
  EndpointConfig c;
  c.listening_ports = {22};
  c.rst_on_unexpected_synack = rst;
  return c;
}

struct Bench {
  TcpEndpoint ep;
  FourTuple tuple{kServer, 22, kClient, 45000};

  explicit Bench(EndpointConfig cfg = server_cfg()) : ep(std::move(cfg), 1) {
    TcpConnState s;
    s.tuple = tuple;
    s.rcv_nxt = 1'000'000;
    s.snd_una = 5'000'000;
    s.snd_nxt = 5'000'000;
    ep.install_established(s);
  }

  std::vector<OutSegment> from_client(std::uint32_t seq, std::uint32_t ack, TcpFlags flags,
                                      net::SimTime now, std::string payload = {},
                                      std::uint16_t sport = 45000) {
    net::TcpSegment seg;
    seg.sport = sport;
    seg.dport = 22;
    seg.seq = seq;
    seg.ack = ack;
    seg.flags = flags;
    seg.payload = std::move(payload);
    return ep.handle(kClient, kServer, seg, now);
  }
  const TcpConnState* conn() const { return ep.find(tuple); }
};

bool only(const std::vector<OutSegment>& out, SegmentKind k) {
  return out.size() == 1 && out.front().kind == k;
}

}  // namespace

// Case 1
TEST(TcpTable, SynToListeningPortGetsSynAck) {
  TcpEndpoint ep(server_cfg(), 1);
  net::TcpSegment syn;
  syn.sport = 40000;
  syn.dport = 22;
  syn.seq = 77;
  syn.flags = TcpFlags{TcpFlag::Syn};
  auto out = ep.handle(kClient, kServer, syn, 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(out[0].seg.flags.synack());
  EXPECT_EQ(out[0].seg.ack, 78u);
  EXPECT_TRUE(out[0].socket.has_value());
}

TEST(TcpTable, SynToClosedPortGetsReset) {
  TcpEndpoint ep(server_cfg(), 1);
  net::TcpSegment syn;
  syn.dport = 23;
  syn.flags = TcpFlags{TcpFlag::Syn};
  auto out = ep.handle(kClient, kServer, syn, 0);
  EXPECT_TRUE(only(out, SegmentKind::Reset));
}

// Case 2
TEST(TcpTable, SynOnEstablishedGetsChallengeAckWhateverTheSeq) {
  for (std::uint32_t seq : {0u, 1'000'000u, 0xdeadbeefu}) {
    Bench b;
    auto out = b.from_client(seq, 0, TcpFlags{TcpFlag::Syn}, 0);
    EXPECT_TRUE(only(out, SegmentKind::ChallengeAck)) << seq;
    EXPECT_EQ(out[0].seg.ack, 1'000'000u);
  }
}

// Case 3
TEST(TcpTable, UnexpectedSynAckGetsResetOnlyWhenEnabled) {
  Bench on(server_cfg(true)), off(server_cfg(false));
  auto a = on.from_client(1, 2, TcpFlags{TcpFlag::Syn, TcpFlag::Ack}, 0, {}, 45001);
  EXPECT_TRUE(only(a, SegmentKind::Reset));
  EXPECT_FALSE(a[0].socket.has_value());
  auto b = off.from_client(1, 2, TcpFlags{TcpFlag::Syn, TcpFlag::Ack}, 0, {}, 45001);
  EXPECT_TRUE(b.empty());
}

// Case 4
TEST(TcpTable, SynAckOnEstablishedGetsChallengeAck) {
  Bench b;
  EXPECT_TRUE(only(b.from_client(123, 456, TcpFlags{TcpFlag::Syn, TcpFlag::Ack}, 0), SegmentKind::ChallengeAck));
}

// Case 5
TEST(TcpTable, RstHandling) {
  {
    Bench b;
    EXPECT_TRUE(b.from_client(1'000'000 + kDefaultRcvWnd + 1, 0, TcpFlags{TcpFlag::Rst}, 0).empty());
    EXPECT_NE(b.conn(), nullptr);
  }
  {
    Bench b;
    EXPECT_TRUE(only(b.from_client(1'000'001, 0, TcpFlags{TcpFlag::Rst}, 0), SegmentKind::ChallengeAck));
    EXPECT_NE(b.conn(), nullptr);
  }
  {
    Bench b;
    EXPECT_TRUE(b.from_client(1'000'000, 0, TcpFlags{TcpFlag::Rst}, 0).empty());
    EXPECT_EQ(b.conn(), nullptr);
  }
}

// Case 6
TEST(TcpTable, OldDataGetsUnlimitedDuplicateAcks) {
  Bench b;
  for (int i = 0; i < 100; ++i)
    ASSERT_TRUE(only(b.from_client(999'999, 5'000'000, TcpFlags{TcpFlag::Ack}, 0), SegmentKind::DuplicateAck));
  EXPECT_EQ(b.ep.stats().duplicate_acks, 100u);
  EXPECT_EQ(b.ep.stats().challenge_acks_suppressed, 0u);
}

// Case 7, exhaustively classified against the window rule.
TEST(TcpTable, InWindowAckClassification) {
  net::Rng rng(8);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 4000; ++i) {
    auto cfg = server_cfg();
    cfg.global_challenge_ack_per_sec = 0;
    TcpEndpoint ep(cfg, 2);
    TcpConnState s;
    s.tuple = FourTuple{kServer, 22, kClient, 45000};
    s.rcv_nxt = static_cast<std::uint32_t>(rng.next_u64());
    s.snd_una = static_cast<std::uint32_t>(rng.next_u64());
    s.snd_nxt = s.snd_una + static_cast<std::uint32_t>(rng.uniform(0, 3000));
    s.unacked.assign(s.snd_nxt - s.snd_una, 'u');
    ep.install_established(s);

    std::uint32_t ack;
    switch (i % 4) {
      case 0: ack = static_cast<std::uint32_t>(rng.next_u64()); break;
      case 1: ack = s.snd_una - static_cast<std::uint32_t>(rng.uniform(0, 70000)); break;
      case 2: ack = s.snd_una + static_cast<std::uint32_t>(rng.uniform(0, 6000)); break;
      default: ack = s.snd_una - (1u << 31) + static_cast<std::uint32_t>(rng.uniform(0, 3)) - 1; break;
    }
    net::TcpSegment seg;
    seg.sport = 45000;
    seg.dport = 22;
    seg.seq = s.rcv_nxt;
    seg.ack = ack;
    seg.flags = TcpFlags{TcpFlag::Ack, TcpFlag::Psh};
    seg.payload = "data";
    auto out = ep.handle(kClient, kServer, seg, 0);

    std::uint64_t behind = static_cast<std::uint32_t>(s.snd_una - ack);
    bool challenge = behind >= std::uint64_t{s.snd_max_wnd} + 1 && behind <= (1ull << 31) - 1;
    bool accept = !challenge && (behind <= s.snd_max_wnd ||
                                 static_cast<std::uint32_t>(ack - s.snd_una) <= s.snd_nxt - s.snd_una);
    const auto& got = ep.app_received(s.tuple);
    if (challenge) {
      ++counts[0];
      ASSERT_TRUE(only(out, SegmentKind::ChallengeAck)) << i;
      ASSERT_TRUE(got.empty());
    } else if (accept) {
      ++counts[1];
      ASSERT_EQ(got, "data") << i;
      ASSERT_EQ(ep.find(s.tuple)->rcv_nxt, s.rcv_nxt + 4);
    } else {
      ++counts[2];
      ASSERT_TRUE(out.empty()) << i;
      ASSERT_TRUE(got.empty());
    }
  }
  EXPECT_GT(counts[0], 100);
  EXPECT_GT(counts[1], 100);
  EXPECT_GT(counts[2], 100);
}

TEST(ChallengeLimiter, IntervalBoundary) {
  {
    Bench b;
    EXPECT_EQ(b.from_client(0, 0, TcpFlags{TcpFlag::Syn}, 0).size(), 1u);
    EXPECT_TRUE(b.from_client(0, 0, TcpFlags{TcpFlag::Syn}, 100).empty());
  }
  {
    Bench b;
    EXPECT_EQ(b.from_client(0, 0, TcpFlags{TcpFlag::Syn}, 0).size(), 1u);
    EXPECT_EQ(b.from_client(0, 0, TcpFlags{TcpFlag::Syn}, 500).size(), 1u);
  }
}

TEST(ChallengeLimiter, GlobalBudgetCountsAcrossConnections) {
  // 2000 connections each triggered once within one second.
  TcpEndpoint ep(server_cfg(), 3);
  for (std::uint16_t i = 0; i < 2000; ++i) {
    TcpConnState s;
    s.tuple = FourTuple{kServer, 22, kClient, static_cast<std::uint16_t>(30000 + i)};
    ep.install_established(s);
  }
  std::size_t sent = 0;
  for (std::uint16_t i = 0; i < 2000; ++i) {
    net::TcpSegment syn;
    syn.sport = static_cast<std::uint16_t>(30000 + i);
    syn.dport = 22;
    syn.flags = TcpFlags{TcpFlag::Syn};
    sent += ep.handle(kClient, kServer, syn, i / 2).size();
  }
  EXPECT_EQ(sent, 1000u);
  EXPECT_EQ(ep.stats().challenge_acks_suppressed, 1000u);
}

TEST(TcpHandshake, ConnectEstablishesBothSides) {
  TcpEndpoint server(server_cfg(), 4), client(EndpointConfig{}, 5);
  FourTuple ct;
  auto syn = client.connect(kClient, kServer, 22, 0, &ct);
  auto synack = server.handle(kClient, kServer, syn.at(0).seg, 10);
  auto ack = client.handle(kServer, kClient, synack.at(0).seg, 20);
  server.handle(kClient, kServer, ack.at(0).seg, 30);
  EXPECT_EQ(client.established_count(), 1u);
  EXPECT_EQ(server.established_count(), 1u);
  auto data = client.send(ct, "hello", 40);
  server.handle(kClient, kServer, data.at(0).seg, 50);
  FourTuple st{kServer, 22, kClient, ct.local_port};
  EXPECT_EQ(server.app_received(st), "hello");
  EXPECT_EQ(server.find(st)->rcv_nxt, client.find(ct)->snd_nxt);
}

TEST(TcpRetransmit, LostDataIsResentWithBackoffThenAborted) {
  auto cfg = server_cfg();
  cfg.max_retransmits = 2;
  Bench b(cfg);
  auto out = b.ep.send(b.tuple, "banner", 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(b.ep.next_retransmit(), 1000);
  EXPECT_TRUE(b.ep.retransmit_due(999).empty());
  auto r1 = b.ep.retransmit_due(1000);
  ASSERT_EQ(r1.size(), 1u);
  EXPECT_EQ(r1[0].seg.payload, "banner");
  EXPECT_EQ(r1[0].seg.seq, 5'000'000u);
  EXPECT_EQ(b.ep.next_retransmit(), 3000);
  EXPECT_EQ(b.ep.retransmit_due(3000).size(), 1u);
  EXPECT_EQ(b.ep.next_retransmit(), 7000);
  EXPECT_TRUE(b.ep.retransmit_due(7000).empty());
  EXPECT_EQ(b.conn(), nullptr);
}

TEST(TcpRetransmit, AckStopsTheTimer) {
  Bench b;
  b.ep.send(b.tuple, "banner", 0);
  b.from_client(1'000'000, 5'000'006, TcpFlags{TcpFlag::Ack}, 100);
  EXPECT_FALSE(b.ep.next_retransmit().has_value());
  EXPECT_EQ(b.conn()->snd_una, 5'000'006u);
}
