#include <gtest/gtest.h>

#include <sstream>

#include "offpath/contract.hpp"
#include "offpath/net/packet.hpp"
#include "offpath/net/rng.hpp"
#include "offpath/net/seq.hpp"
#include "offpath/net/trace.hpp"
#include "offpath/net/simulator.hpp"

using namespace offpath;
using namespace offpath::net;

namespace {

// Membership by walking lo, lo+1, ..., lo+size with wrapping adds.
bool window_by_enumeration(std::uint32_t x, std::uint32_t lo, std::uint32_t size) {
  std::uint32_t v = lo;
  for (std::uint64_t k = 0; k <= size; ++k, ++v)
    if (v == x) return true;
  return false;
}

struct Recorder : Node {
  std::vector<std::pair<SimTime, std::string>> log;
  void on_packet(const Packet& pkt, Network& net) override { log.emplace_back(net.now(), pkt.summary()); }
  void on_timer(std::uint64_t token, Network& net) override {
    log.emplace_back(net.now(), "timer " + std::to_string(token));
  }
};

Packet ping(Ipv4Addr src, Ipv4Addr dst, std::uint16_t seq) {
  return make_icmp_packet(src, dst, EchoRequest{1, seq});
}

}  // namespace

TEST(SeqInWindow, Examples) {
  EXPECT_TRUE(seq_in_window(1000, 1000, 87380));
  EXPECT_FALSE(seq_in_window(999, 1000, 87380));
  EXPECT_TRUE(seq_in_window(50, 0xffffffffu - 99, 87380));
  EXPECT_TRUE(seq_in_window(1000 + 87380, 1000, 87380));
  EXPECT_FALSE(seq_in_window(1000 + 87381, 1000, 87380));
}

TEST(SeqInWindow, WraparoundNeighborhoodMatchesEnumeration) {
  const std::uint32_t lo = 0xffffffffu - 99;
  for (std::uint32_t off = 0; off < 400; ++off) {
    std::uint32_t x = lo - 150 + off;
    EXPECT_EQ(seq_in_window(x, lo, 200), window_by_enumeration(x, lo, 200)) << x;
  }
}

TEST(SeqInWindow, RandomTriplesMatchEnumeration) {
  Rng rng(7);
  for (int i = 0; i < 3000; ++i) {
    auto lo = static_cast<std::uint32_t>(rng.next_u64());
    auto size = static_cast<std::uint32_t>(rng.uniform(0, 2000));
    // Half the probes land near the window so both outcomes are exercised.
    auto x = i % 2 ? static_cast<std::uint32_t>(lo + rng.uniform(0, 4000) - 1000)
                   : static_cast<std::uint32_t>(rng.next_u64());
    ASSERT_EQ(seq_in_window(x, lo, size), window_by_enumeration(x, lo, size))
        << "x=" << x << " lo=" << lo << " size=" << size;
  }
}

TEST(Address, ParseAndFormat) {
  auto a = Ipv4Addr::parse("10.1.0.2");
  ASSERT_TRUE(a);
  EXPECT_EQ(*a, Ipv4Addr(10, 1, 0, 2));
  EXPECT_EQ(a->to_string(), "10.1.0.2");
  EXPECT_FALSE(Ipv4Addr::parse("10.1.0"));
  EXPECT_FALSE(Ipv4Addr::parse("10.1.0.256"));
  auto p = Ipv4Prefix::parse("100.64.1.7/10");
  ASSERT_TRUE(p);
  EXPECT_EQ(p->base, Ipv4Addr(100, 64, 0, 0));
  EXPECT_EQ(p->size(), 1u << 22);
  EXPECT_TRUE(p->contains(Ipv4Addr(100, 127, 255, 255)));
  EXPECT_FALSE(p->contains(Ipv4Addr(100, 128, 0, 0)));
}

TEST(Packet, RstCarriesNoPayload) {
  TcpSegment seg;
  seg.flags = TcpFlags{TcpFlag::Rst};
  seg.payload = "x";
  EXPECT_THROW(make_tcp_packet(Ipv4Addr(1, 1, 1, 1), Ipv4Addr(2, 2, 2, 2), seg), ContractViolation);
}

TEST(Packet, EmbeddedLengthBounds) {
  EXPECT_NO_THROW(make_frag_needed(68, {}));
  EXPECT_NO_THROW(make_frag_needed(68, std::vector<std::uint8_t>(576)));
  EXPECT_THROW(make_frag_needed(68, std::vector<std::uint8_t>(577)), ContractViolation);
}

TEST(Packet, HeaderImageRoundTrip) {
  auto reply = make_icmp_packet(Ipv4Addr(10, 0, 0, 1), Ipv4Addr(10, 1, 0, 2), EchoReply{0x1234, 77});
  reply.ip.ipid = 4242;
  auto image = header_image(reply);
  ASSERT_EQ(image.size(), 28u);
  auto q = parse_header_image(image);
  ASSERT_TRUE(q);
  EXPECT_EQ(q->src, Ipv4Addr(10, 0, 0, 1));
  EXPECT_EQ(q->dst, Ipv4Addr(10, 1, 0, 2));
  EXPECT_EQ(q->protocol, 1);
  EXPECT_EQ(q->ipid, 4242);
  EXPECT_EQ(q->icmp_type, 0);
  EXPECT_EQ(q->icmp_id, 0x1234);
  EXPECT_EQ(q->icmp_seqno, 77);
  EXPECT_FALSE(parse_header_image(std::span(image).first(20)));
}

TEST(Packet, IpidWrapsModulo16Bits) {
  std::uint16_t id = 65535;
  ++id;
  EXPECT_EQ(id, 0);
}

TEST(EventQueue, TiesFireInInsertionOrder) {
  Network net(1);
  Recorder r;
  auto h = net.add_host("r", r);
  net.set_timer(h, 5, 1);
  net.set_timer(h, 5, 2);
  net.set_timer(h, 3, 3);
  net.run();
  ASSERT_EQ(r.log.size(), 3u);
  EXPECT_EQ(r.log[0].second, "timer 3");
  EXPECT_EQ(r.log[1].second, "timer 1");
  EXPECT_EQ(r.log[2].second, "timer 2");
}

TEST(EventQueue, SchedulingInThePastAborts) {
  EventQueue q;
  EXPECT_THROW(q.schedule(3, 4, Timer{HostId{0}, 0}), ContractViolation);
  Network net(1);
  Recorder r;
  auto h = net.add_host("r", r);
  net.set_timer(h, 4, 0);
  net.run();
  EXPECT_THROW(net.set_timer(h, 3, 0), ContractViolation);
}

TEST(EventQueue, TotalOrderOnRandomSchedule) {
  EventQueue q;
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) q.schedule(static_cast<SimTime>(rng.uniform(0, 50)), 0, Timer{});
  SimTime last_t = -1;
  std::uint64_t last_seq = 0;
  while (!q.empty()) {
    auto e = q.pop();
    if (e.fire_time == last_t) EXPECT_GT(e.seqno, last_seq);
    else EXPECT_GT(e.fire_time, last_t);
    last_t = e.fire_time;
    last_seq = e.seqno;
  }
}

TEST(Transmit, DeliversAfterLatency) {
  Network net(1);
  Recorder a, b;
  auto ha = net.add_host("a", a);
  auto hb = net.add_host("b", b);
  net.assign_address(ha, Ipv4Addr(1, 0, 0, 1));
  net.assign_address(hb, Ipv4Addr(1, 0, 0, 2));
  net.set_link(ha, hb, LinkModel{10, 0.0, false});
  EXPECT_EQ(net.transmit(ha, ping(Ipv4Addr(1, 0, 0, 1), Ipv4Addr(1, 0, 0, 2), 1)), TransmitResult::Scheduled);
  net.run();
  ASSERT_EQ(b.log.size(), 1u);
  EXPECT_EQ(b.log[0].first, 10);
}

TEST(Transmit, SpoofedSourceFilteredUnlessPermitted) {
  Network net(1);
  Recorder a, b;
  auto ha = net.add_host("a", a);
  auto hb = net.add_host("b", b);
  net.assign_address(ha, Ipv4Addr(1, 0, 0, 1));
  net.assign_address(hb, Ipv4Addr(1, 0, 0, 2));
  net.set_link(ha, hb, LinkModel{10, 0.0, false});
  std::ostringstream trace;
  net.trace().attach(&trace);
  EXPECT_EQ(net.transmit(ha, ping(Ipv4Addr(9, 9, 9, 9), Ipv4Addr(1, 0, 0, 2), 1)), TransmitResult::Filtered);
  net.run();
  EXPECT_TRUE(b.log.empty());
  EXPECT_EQ(net.packets_filtered(), 1u);
  EXPECT_NE(trace.str().find(" filtered "), std::string::npos);

  net.set_link(ha, hb, LinkModel{10, 0.0, true});
  EXPECT_EQ(net.transmit(ha, ping(Ipv4Addr(9, 9, 9, 9), Ipv4Addr(1, 0, 0, 2), 2)), TransmitResult::Scheduled);
  net.run();
  EXPECT_EQ(b.log.size(), 1u);
}

TEST(Transmit, UnownedDestinationHasNoRoute) {
  Network net(1);
  Recorder a;
  auto ha = net.add_host("a", a);
  net.assign_address(ha, Ipv4Addr(1, 0, 0, 1));
  EXPECT_EQ(net.transmit(ha, ping(Ipv4Addr(1, 0, 0, 1), Ipv4Addr(8, 8, 8, 8), 1)), TransmitResult::NoRoute);
}

TEST(Transmit, LossIsBinomial) {
  Network net(2024);
  Recorder a, b;
  auto ha = net.add_host("a", a);
  auto hb = net.add_host("b", b);
  net.assign_address(ha, Ipv4Addr(1, 0, 0, 1));
  net.assign_address(hb, Ipv4Addr(1, 0, 0, 2));
  net.set_link(ha, hb, LinkModel{1, 0.1, false});
  for (int i = 0; i < 10000; ++i) net.transmit(ha, ping(Ipv4Addr(1, 0, 0, 1), Ipv4Addr(1, 0, 0, 2), 1));
  net.run();
  EXPECT_NEAR(static_cast<double>(net.packets_lost()), 1000.0, 100.0);
  EXPECT_EQ(net.packets_lost() + b.log.size(), 10000u);
}

TEST(Transmit, SameSeedSameDeliveryLog) {
  auto run = [](std::uint64_t seed) {
    Network net(seed);
    Recorder a, b;
    auto ha = net.add_host("a", a);
    auto hb = net.add_host("b", b);
    net.assign_address(ha, Ipv4Addr(1, 0, 0, 1));
    net.assign_address(hb, Ipv4Addr(1, 0, 0, 2));
    net.set_link(ha, hb, LinkModel{3, 0.3, false});
    std::ostringstream trace;
    net.trace().attach(&trace);
    for (std::uint16_t i = 0; i < 500; ++i) net.transmit(ha, ping(Ipv4Addr(1, 0, 0, 1), Ipv4Addr(1, 0, 0, 2), i));
    net.run();
    return trace.str();
  };
  EXPECT_EQ(run(5), run(5));
  EXPECT_NE(run(5), run(6));
}

TEST(Trace, LineFormat) {
  std::ostringstream out;
  Trace t;
  t.attach(&out);
  t.record(42, "server", TraceDir::Tx, "detail here");
  EXPECT_EQ(out.str(), "42 server tx detail here\n");
}

TEST(Rng, UniformIsInclusiveAndDeterministic) {
  Rng a(9), b(9);
  bool saw_lo = false, saw_hi = false;
  for (int i = 0; i < 10000; ++i) {
    auto v = a.uniform(3, 7);
    ASSERT_EQ(v, b.uniform(3, 7));
    ASSERT_GE(v, 3u);
    ASSERT_LE(v, 7u);
    saw_lo |= v == 3;
    saw_hi |= v == 7;
  }
  EXPECT_TRUE(saw_lo && saw_hi);
  EXPECT_EQ(a.uniform(5, 5), 5u);
}

TEST(Rng, DerivedStreamsDiffer) {
  EXPECT_EQ(derive_seed(1, "net"), derive_seed(1, "net"));
  EXPECT_NE(derive_seed(1, "net"), derive_seed(1, "server"));
  EXPECT_NE(derive_seed(1, "net"), derive_seed(2, "net"));
}
