#include "offpath/victim/tcp.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "offpath/contract.hpp"
#include "offpath/net/seq.hpp"

namespace offpath::victim {

using net::TcpFlag;
using net::TcpFlags;

std::string FourTuple::to_string() const {
  return fmt::format("{}:{}<->{}:{}", local_addr.to_string(), local_port, remote_addr.to_string(),
                     remote_port);
}

ChallengeAckLimiter::ChallengeAckLimiter(net::SimTime interval_ms, std::uint32_t global_per_sec)
    : interval_ms_(interval_ms), global_per_sec_(global_per_sec) {
  expects(interval_ms > 0, "challenge ACK interval must be positive");
}

bool ChallengeAckLimiter::permit(TcpConnState& conn, net::SimTime now) {
  if (conn.last_challenge_ack_ms && now - *conn.last_challenge_ack_ms < interval_ms_) return false;
  if (global_per_sec_ > 0) {
    std::int64_t epoch = now / 1000;
    if (epoch != epoch_) {
      epoch_ = epoch;
      used_in_epoch_ = 0;
    }
    if (used_in_epoch_ >= global_per_sec_) return false;
    ++used_in_epoch_;
  }
  conn.last_challenge_ack_ms = now;
  return true;
}

TcpEndpoint::TcpEndpoint(EndpointConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      rng_(seed),
      limiter_(cfg_.challenge_ack_interval_ms, cfg_.global_challenge_ack_per_sec) {
  expects(cfg_.rcv_wnd < net::kHalfSeqSpace, "receive window must be below 2^31");
  expects(cfg_.snd_max_wnd < net::kHalfSeqSpace, "send window must be below 2^31");
}

std::uint16_t TcpEndpoint::mss_for(net::Ipv4Addr dst) const {
  std::uint16_t pmtu = mss_of_ ? mss_of_(dst) : 1500;
  return static_cast<std::uint16_t>(std::max(pmtu, std::uint16_t{68}) - 40);
}

OutSegment TcpEndpoint::ack_for(const TcpConnState& c, SegmentKind kind) const {
  OutSegment o;
  o.src = c.tuple.local_addr;
  o.dst = c.tuple.remote_addr;
  o.seg.sport = c.tuple.local_port;
  o.seg.dport = c.tuple.remote_port;
  o.seg.seq = c.snd_nxt;
  o.seg.ack = c.rcv_nxt;
  o.seg.flags = TcpFlags{TcpFlag::Ack};
  o.seg.window = static_cast<std::uint16_t>(std::min<std::uint32_t>(c.rcv_wnd, 0xffff));
  o.kind = kind;
  o.socket = c.socket_id;
  return o;
}

void TcpEndpoint::reset_reply(net::Ipv4Addr src, net::Ipv4Addr dst, const net::TcpSegment& seg,
                              std::vector<OutSegment>& out) {
  OutSegment o;
  o.src = dst;
  o.dst = src;
  o.seg.sport = seg.dport;
  o.seg.dport = seg.sport;
  if (seg.flags.ack()) {
    o.seg.seq = seg.ack;
    o.seg.flags = TcpFlags{TcpFlag::Rst};
  } else {
    o.seg.seq = 0;
    o.seg.ack = seg.seq + static_cast<std::uint32_t>(seg.payload.size()) + (seg.flags.syn() ? 1 : 0);
    o.seg.flags = TcpFlags{TcpFlag::Rst, TcpFlag::Ack};
  }
  o.kind = SegmentKind::Reset;
  ++stats_.resets_sent;
  out.push_back(std::move(o));
}

void TcpEndpoint::challenge(TcpConnState& c, net::SimTime now, std::vector<OutSegment>& out,
                            const char* why) {
  if (limiter_.permit(c, now)) {
    ++stats_.challenge_acks_sent;
    out.push_back(ack_for(c, SegmentKind::ChallengeAck));
  } else {
    ++stats_.challenge_acks_suppressed;
    if (note_) note_(fmt::format("challenge-ack suppressed ({}) {}", why, c.tuple.to_string()));
  }
}

void TcpEndpoint::abort(std::map<FourTuple, TcpConnState>::iterator it, const char* why) {
  ++stats_.connections_aborted;
  if (note_) note_(fmt::format("abort {} ({})", it->first.to_string(), why));
  conns_.erase(it);
}

void TcpEndpoint::arm(TcpConnState& c, net::SimTime now) {
  if (c.rto_deadline) return;
  if (c.rto_ms == 0) c.rto_ms = cfg_.initial_rto_ms;
  c.rto_deadline = now + c.rto_ms;
}

void TcpEndpoint::acknowledge(TcpConnState& c, std::uint32_t ack) {
  std::uint32_t advance = ack - c.snd_una;
  c.unacked.erase(0, std::min<std::size_t>(advance, c.unacked.size()));
  c.snd_una = ack;
  c.retransmits = 0;
  c.rto_ms = cfg_.initial_rto_ms;
  c.rto_deadline.reset();
}

void TcpEndpoint::flush(TcpConnState& c, std::vector<OutSegment>& out, net::SimTime now) {
  if (c.phase != TcpPhase::Established) return;
  std::uint16_t mss = mss_for(c.tuple.remote_addr);
  while (!c.send_buffer.empty()) {
    std::uint32_t in_flight = c.snd_nxt - c.snd_una;
    if (in_flight >= c.snd_max_wnd) break;
    std::size_t n = std::min<std::size_t>({mss, c.send_buffer.size(), c.snd_max_wnd - in_flight});
    OutSegment o = ack_for(c, SegmentKind::Data);
    o.seg.flags = TcpFlags{TcpFlag::Ack, TcpFlag::Psh};
    o.seg.payload = c.send_buffer.substr(0, n);
    c.unacked += o.seg.payload;
    c.send_buffer.erase(0, n);
    c.snd_nxt += static_cast<std::uint32_t>(n);
    out.push_back(std::move(o));
    arm(c, now);
  }
}

void TcpEndpoint::expire_half_open(net::SimTime now) {
  while (!half_open_.empty() && now - half_open_.front().first >= cfg_.half_open_timeout_ms) {
    auto [created, tuple] = half_open_.front();
    half_open_.pop_front();
    auto it = conns_.find(tuple);
    if (it != conns_.end() && it->second.phase == TcpPhase::SynReceived &&
        it->second.created_ms == created)
      conns_.erase(it);
  }
}

void TcpEndpoint::on_established_segment(TcpConnState& c, const net::TcpSegment& seg,
                                         net::SimTime now, std::vector<OutSegment>& out) {
  // Old data: acknowledge immediately, without any rate limit.
  std::uint32_t below = c.rcv_nxt - seg.seq;
  if (below >= 1 && below < net::kHalfSeqSpace) {
    ++stats_.duplicate_acks;
    out.push_back(ack_for(c, SegmentKind::DuplicateAck));
    return;
  }
  if (!net::seq_in_window(seg.seq, c.rcv_nxt, c.rcv_wnd)) {
    ++stats_.dropped;
    return;
  }
  std::uint32_t behind = c.snd_una - seg.ack;
  if (behind > c.snd_max_wnd && behind < net::kHalfSeqSpace) {
    challenge(c, now, out, "ack in challenge window");
    return;
  }
  std::uint32_t advance = seg.ack - c.snd_una;
  std::uint32_t in_flight = c.snd_nxt - c.snd_una;
  if (behind > c.snd_max_wnd && advance > in_flight) {
    ++stats_.dropped;
    return;
  }
  if (advance != 0 && advance <= in_flight) {
    acknowledge(c, seg.ack);
    if (c.snd_nxt != c.snd_una) arm(c, now);
  }
  if (!seg.payload.empty()) {
    if (seg.seq == c.rcv_nxt) {
      c.rcv_nxt += static_cast<std::uint32_t>(seg.payload.size());
      received_[c.tuple] += seg.payload;
      deliveries_.emplace_back(c.tuple, seg.payload);
      out.push_back(ack_for(c, SegmentKind::PureAck));
    } else {
      // Out of order; reassembly is not modeled.
      out.push_back(ack_for(c, SegmentKind::PureAck));
    }
  }
  flush(c, out, now);
}

std::vector<OutSegment> TcpEndpoint::handle(net::Ipv4Addr src, net::Ipv4Addr dst,
                                            const net::TcpSegment& seg, net::SimTime now) {
  expire_half_open(now);
  std::vector<OutSegment> out;
  FourTuple key{dst, seg.dport, src, seg.sport};
  auto it = conns_.find(key);
  const TcpFlags f = seg.flags;

  if (f.rst()) {
    if (it == conns_.end()) {
      ++stats_.dropped;
      return out;
    }
    auto& c = it->second;
    if (c.phase == TcpPhase::SynSent) {
      if (f.ack() && seg.ack == c.snd_nxt) abort(it, "refused");
      else ++stats_.dropped;
      return out;
    }
    if (!net::seq_in_window(seg.seq, c.rcv_nxt, c.rcv_wnd)) {
      ++stats_.dropped;
    } else if (seg.seq == c.rcv_nxt) {
      abort(it, "reset");
    } else {
      challenge(c, now, out, "rst in window");
    }
    return out;
  }

  if (f.syn() && !f.ack()) {
    if (it != conns_.end()) {
      auto& c = it->second;
      if (c.phase == TcpPhase::Established) {
        challenge(c, now, out, "syn on established");
      } else if (c.phase == TcpPhase::SynReceived) {
        OutSegment o = ack_for(c, SegmentKind::Handshake);
        o.seg.seq = c.snd_una;
        o.seg.flags = TcpFlags{TcpFlag::Syn, TcpFlag::Ack};
        out.push_back(std::move(o));
      } else {
        ++stats_.dropped;
      }
      return out;
    }
    if (!cfg_.listening_ports.contains(seg.dport)) {
      reset_reply(src, dst, seg, out);
      return out;
    }
    TcpConnState c;
    c.tuple = key;
    c.phase = TcpPhase::SynReceived;
    c.rcv_nxt = seg.seq + 1;
    c.rcv_wnd = cfg_.rcv_wnd;
    c.snd_una = static_cast<std::uint32_t>(rng_.uniform(0, 0xffffffff));
    c.snd_nxt = c.snd_una + 1;
    c.snd_max_wnd = cfg_.snd_max_wnd;
    c.socket_id = next_socket();
    c.created_ms = now;
    auto& stored = conns_.emplace(key, std::move(c)).first->second;
    half_open_.emplace_back(now, key);
    arm(stored, now);
    OutSegment o = ack_for(stored, SegmentKind::Handshake);
    o.seg.seq = stored.snd_una;
    o.seg.flags = TcpFlags{TcpFlag::Syn, TcpFlag::Ack};
    out.push_back(std::move(o));
    return out;
  }

  if (f.synack()) {
    if (it == conns_.end()) {
      if (cfg_.rst_on_unexpected_synack) reset_reply(src, dst, seg, out);
      else ++stats_.dropped;
      return out;
    }
    auto& c = it->second;
    if (c.phase == TcpPhase::SynSent) {
      if (seg.ack != c.snd_nxt) {
        reset_reply(src, dst, seg, out);
        return out;
      }
      c.rcv_nxt = seg.seq + 1;
      acknowledge(c, seg.ack);
      c.phase = TcpPhase::Established;
      out.push_back(ack_for(c, SegmentKind::Handshake));
      flush(c, out, now);
      return out;
    }
    challenge(c, now, out, "syn/ack on synchronized connection");
    return out;
  }

  if (it == conns_.end()) {
    if (f.ack()) reset_reply(src, dst, seg, out);
    else ++stats_.dropped;
    return out;
  }
  auto& c = it->second;
  if (!f.ack() || c.phase == TcpPhase::SynSent) {
    ++stats_.dropped;
    return out;
  }
  if (c.phase == TcpPhase::SynReceived) {
    if (seg.ack != c.snd_nxt || !net::seq_in_window(seg.seq, c.rcv_nxt, c.rcv_wnd)) {
      ++stats_.dropped;
      return out;
    }
    acknowledge(c, seg.ack);
    c.phase = TcpPhase::Established;
  }
  on_established_segment(c, seg, now, out);
  return out;
}

std::vector<OutSegment> TcpEndpoint::connect(net::Ipv4Addr local, net::Ipv4Addr remote,
                                             std::uint16_t remote_port, net::SimTime now,
                                             FourTuple* tuple_out) {
  FourTuple key;
  do {
    auto port = static_cast<std::uint16_t>(rng_.uniform(kEphemeralLo, kEphemeralHi));
    key = FourTuple{local, port, remote, remote_port};
  } while (conns_.contains(key));
  TcpConnState c;
  c.tuple = key;
  c.phase = TcpPhase::SynSent;
  c.rcv_wnd = cfg_.rcv_wnd;
  c.snd_una = static_cast<std::uint32_t>(rng_.uniform(0, 0xffffffff));
  c.snd_nxt = c.snd_una + 1;
  c.snd_max_wnd = cfg_.snd_max_wnd;
  c.socket_id = next_socket();
  c.created_ms = now;
  auto& stored = conns_.emplace(key, std::move(c)).first->second;
  arm(stored, now);
  if (tuple_out) *tuple_out = key;
  OutSegment o = ack_for(stored, SegmentKind::Handshake);
  o.seg.seq = stored.snd_una;
  o.seg.ack = 0;
  o.seg.flags = TcpFlags{TcpFlag::Syn};
  return {std::move(o)};
}

std::vector<OutSegment> TcpEndpoint::send(const FourTuple& tuple, std::string data,
                                          net::SimTime now) {
  auto it = conns_.find(tuple);
  expects(it != conns_.end(), "send on unknown connection");
  it->second.send_buffer += data;
  std::vector<OutSegment> out;
  flush(it->second, out, now);
  return out;
}

std::vector<OutSegment> TcpEndpoint::retransmit_due(net::SimTime now) {
  expire_half_open(now);
  std::vector<OutSegment> out;
  for (auto it = conns_.begin(); it != conns_.end();) {
    auto& c = it->second;
    if (!c.rto_deadline || *c.rto_deadline > now) {
      ++it;
      continue;
    }
    if (c.retransmits >= cfg_.max_retransmits) {
      auto dead = it++;
      abort(dead, "retransmission timeout");
      continue;
    }
    ++c.retransmits;
    c.rto_ms *= 2;
    c.rto_deadline = now + c.rto_ms;
    if (c.phase != TcpPhase::Established) {
      OutSegment o = ack_for(c, SegmentKind::Handshake);
      o.seg.seq = c.snd_una;
      if (c.phase == TcpPhase::SynSent) {
        o.seg.ack = 0;
        o.seg.flags = TcpFlags{TcpFlag::Syn};
      } else {
        o.seg.flags = TcpFlags{TcpFlag::Syn, TcpFlag::Ack};
      }
      out.push_back(std::move(o));
    } else if (!c.unacked.empty()) {
      OutSegment o = ack_for(c, SegmentKind::Data);
      o.seg.seq = c.snd_una;
      o.seg.flags = TcpFlags{TcpFlag::Ack, TcpFlag::Psh};
      o.seg.payload = c.unacked.substr(0, mss_for(c.tuple.remote_addr));
      out.push_back(std::move(o));
    } else {
      c.rto_deadline.reset();
    }
    ++it;
  }
  return out;
}

std::optional<net::SimTime> TcpEndpoint::next_retransmit() const {
  std::optional<net::SimTime> next;
  for (const auto& [tuple, c] : conns_)
    if (c.rto_deadline && (!next || *c.rto_deadline < *next)) next = c.rto_deadline;
  return next;
}

const TcpConnState* TcpEndpoint::find(const FourTuple& tuple) const {
  auto it = conns_.find(tuple);
  return it == conns_.end() ? nullptr : &it->second;
}

const TcpConnState* TcpEndpoint::find_by_remote(net::Ipv4Addr remote) const {
  for (const auto& [tuple, c] : conns_) {
    if (tuple.remote_addr == remote && c.phase == TcpPhase::Established) return &c;
  }
  return nullptr;
}

std::size_t TcpEndpoint::established_count() const {
  return static_cast<std::size_t>(std::count_if(conns_.begin(), conns_.end(), [](const auto& kv) {
    return kv.second.phase == TcpPhase::Established;
  }));
}

TcpConnState& TcpEndpoint::install_established(TcpConnState state) {
  state.phase = TcpPhase::Established;
  if (state.socket_id == 0) state.socket_id = next_socket();
  expects(static_cast<std::uint32_t>(state.snd_nxt - state.snd_una) <= state.snd_max_wnd,
          "in-flight data exceeds SND.MAX.WND");
  auto key = state.tuple;
  auto [it, inserted] = conns_.insert_or_assign(key, std::move(state));
  return it->second;
}

const std::string& TcpEndpoint::app_received(const FourTuple& tuple) const {
  static const std::string empty;
  auto it = received_.find(tuple);
  return it == received_.end() ? empty : it->second;
}

std::vector<std::pair<FourTuple, std::string>> TcpEndpoint::take_deliveries() {
  return std::exchange(deliveries_, {});
}

}  // namespace offpath::victim
