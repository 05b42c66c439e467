#include "offpath/attack/prober.hpp"

#include <algorithm>

#include "offpath/attack/forge.hpp"
#include "offpath/attack/observation.hpp"
#include "offpath/contract.hpp"

namespace offpath::attack {

void AttackerHost::on_packet(const net::Packet& pkt, net::Network&) {
  const auto* icmp = pkt.icmp();
  const auto* reply = icmp ? std::get_if<net::EchoReply>(icmp) : nullptr;
  if (!reply) {
    ++other_packets_;
    return;
  }
  ++echo_replies_;
  std::uint32_t key = (std::uint32_t{reply->id} << 16) | reply->seqno;
  replies_[key] = pkt.ip.ipid;
}

std::optional<std::uint16_t> AttackerHost::take_reply(std::uint32_t key) {
  auto it = replies_.find(key);
  if (it == replies_.end()) return std::nullopt;
  auto v = it->second;
  replies_.erase(it);
  return v;
}

void RateGovernor::expire(net::SimTime now) {
  while (!sent_.empty() && sent_.front().first <= now - 1000) {
    in_window_ -= sent_.front().second;
    sent_.pop_front();
  }
}

net::SimTime RateGovernor::earliest(net::SimTime now, std::size_t n) {
  expects(n <= static_cast<std::size_t>(pps_), "window larger than the per-second budget");
  expire(now);
  if (in_window_ + n <= static_cast<std::size_t>(pps_)) return now;
  std::size_t remaining = in_window_;
  for (const auto& [t, count] : sent_) {
    remaining -= count;
    if (remaining + n <= static_cast<std::size_t>(pps_)) return t + 1000;
  }
  return now;
}

void RateGovernor::record(net::SimTime now, std::size_t n) {
  expire(now);
  if (!sent_.empty() && sent_.back().first == now) sent_.back().second += n;
  else sent_.emplace_back(now, n);
  in_window_ += n;
  peak_ = std::max(peak_, in_window_);
}

std::size_t Window::packet_count() const {
  std::size_t n = setup.size() + 2;
  for (const auto& s : slots) n += s.triggers.size() + 1;
  return n;
}

bool WindowResult::any_positive(std::uint16_t threshold) const {
  return first_positive(threshold).has_value();
}

std::optional<std::size_t> WindowResult::first_positive(std::uint16_t threshold) const {
  for (std::size_t i = 0; i < extras.size(); ++i)
    if (extras[i] >= threshold) return i;
  return std::nullopt;
}

Prober::Prober(net::Network& net, net::HostId self, AttackerHost& host, net::Ipv4Addr server)
    : net_(net), self_(self), host_(host), server_(server) {}

net::Packet Prober::echo(net::Ipv4Addr from, std::uint32_t* key_out) {
  std::uint32_t key = next_key_++;
  if (key_out) *key_out = key;
  return echo_request(from, server_, static_cast<std::uint16_t>(key >> 16),
                      static_cast<std::uint16_t>(key));
}

void Prober::wait_until(net::SimTime t) {
  if (t > net_.now()) net_.run_until(t);
}

void Prober::send_raw(std::span<const net::Packet> pkts) {
  wait_until(governor_.earliest(net_.now(), pkts.size()));
  governor_.record(net_.now(), pkts.size());
  for (const auto& p : pkts) net_.transmit(self_, p);
}

std::vector<Ticket> Prober::send(std::span<const Window> batch) {
  std::size_t total = 0;
  for (const auto& w : batch) total += w.packet_count();
  wait_until(governor_.earliest(net_.now(), total));
  governor_.record(net_.now(), total);

  std::vector<Ticket> tickets;
  tickets.reserve(batch.size());
  for (const auto& w : batch) {
    Ticket t;
    t.sent_at = net_.now();
    t.deadline = net_.now() + reply_wait();
    for (const auto& p : w.setup) net_.transmit(self_, p);
    std::uint32_t key = 0;
    net_.transmit(self_, echo(w.observer, &t.prime_key));  // absorbs the idle-time increment
    net_.transmit(self_, echo(w.observer, &key));
    t.echo_keys.push_back(key);
    for (const auto& slot : w.slots) {
      for (const auto& p : slot.triggers) net_.transmit(self_, p);
      net_.transmit(self_, echo(w.observer, &key));
      t.echo_keys.push_back(key);
    }
    tickets.push_back(std::move(t));
  }
  return tickets;
}

WindowResult Prober::collect(const Ticket& t) {
  wait_until(t.deadline);
  WindowResult r;
  r.sent_at = t.sent_at;
  std::vector<std::optional<std::uint16_t>> ipids;
  ipids.reserve(t.echo_keys.size());
  bool primed = host_.take_reply(t.prime_key).has_value();
  for (auto k : t.echo_keys) ipids.push_back(host_.take_reply(k));
  r.complete = primed && std::all_of(ipids.begin(), ipids.end(), [](const auto& v) { return v.has_value(); });
  if (!r.complete) return r;
  for (std::size_t i = 1; i < ipids.size(); ++i)
    r.extras.push_back(static_cast<std::uint16_t>(ipid_delta(*ipids[i - 1], *ipids[i]) - 1));
  return r;
}

WindowResult Prober::probe(const Window& w) { return collect(send(w)); }

std::optional<ScanHit> Prober::scan(std::size_t count,
                                    const std::function<std::vector<Window>(std::size_t)>& make,
                                    net::SimTime deadline, int resends,
                                    std::uint16_t threshold) {
  struct Pending {
    std::size_t index;
    int attempt;
    std::vector<Ticket> tickets;
  };
  std::deque<Pending> pending;
  std::deque<std::pair<std::size_t, int>> retry;
  std::size_t next = 0;

  auto drain = [&](net::SimTime upto) -> std::optional<ScanHit> {
    while (!pending.empty() && pending.front().tickets.front().deadline <= upto) {
      auto p = std::move(pending.front());
      pending.pop_front();
      std::vector<WindowResult> results;
      bool complete = true;
      for (const auto& t : p.tickets) {
        results.push_back(collect(t));
        complete = complete && results.back().complete;
      }
      for (std::size_t w = 0; w < results.size(); ++w) {
        if (!results[w].complete) continue;
        if (auto slot = results[w].first_positive(threshold))
          return ScanHit{p.index, w, *slot, std::move(results[w])};
      }
      if (!complete && p.attempt < resends) retry.emplace_back(p.index, p.attempt + 1);
    }
    return std::nullopt;
  };

  while (next < count || !retry.empty() || !pending.empty()) {
    if (net_.now() > deadline) return std::nullopt;
    if (next < count || !retry.empty()) {
      std::size_t index;
      int attempt;
      if (!retry.empty()) {
        std::tie(index, attempt) = retry.front();
        retry.pop_front();
      } else {
        index = next++;
        attempt = 0;
      }
      std::vector<Window> batch = make(index);
      std::size_t total = 0;
      for (const auto& w : batch) total += w.packet_count();
      net::SimTime at = governor_.earliest(net_.now(), total);
      // Read every result that is due before this batch goes out.
      if (auto hit = drain(at)) return hit;
      pending.push_back(Pending{index, attempt, send(batch)});
    } else {
      if (auto hit = drain(pending.front().tickets.front().deadline)) return hit;
    }
  }
  return std::nullopt;
}

void Prober::wait_for_challenge_budget(net::SimTime interval) {
  if (last_possible_challenge_) wait_until(*last_possible_challenge_ + interval);
}

}  // namespace offpath::attack
