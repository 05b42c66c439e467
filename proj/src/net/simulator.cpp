#include "offpath/net/simulator.hpp"

#include <algorithm>

#include "offpath/contract.hpp"

namespace offpath::net {

namespace {

// std heap functions build a max-heap; invert so the earliest event is on top.
bool later(const Event& a, const Event& b) {
  if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
  return a.seqno > b.seqno;
}

}  // namespace

std::uint64_t EventQueue::schedule(SimTime fire_time, SimTime now, EventAction action) {
  expects(fire_time >= now, "event scheduled in the past");
  std::uint64_t seqno = next_seqno_++;
  heap_.push_back(Event{fire_time, seqno, std::move(action)});
  std::push_heap(heap_.begin(), heap_.end(), later);
  return seqno;
}

Event EventQueue::pop() {
  expects(!heap_.empty(), "pop from empty event queue");
  std::pop_heap(heap_.begin(), heap_.end(), later);
  Event ev = std::move(heap_.back());
  heap_.pop_back();
  return ev;
}

Network::Network(std::uint64_t seed) : loss_rng_(derive_seed(seed, "net")) {}

HostId Network::add_host(std::string name, Node& node) {
  hosts_.push_back(HostEntry{std::move(name), &node, 0});
  return static_cast<HostId>(hosts_.size() - 1);
}

void Network::assign_address(HostId host, Ipv4Addr addr) {
  entry(host);
  auto [it, inserted] = owners_.emplace(addr.value, host);
  expects(inserted || it->second == host, "address already owned by another host");
}

std::optional<HostId> Network::owner_of(Ipv4Addr addr) const {
  auto it = owners_.find(addr.value);
  if (it == owners_.end()) return std::nullopt;
  return it->second;
}

bool Network::owns(HostId host, Ipv4Addr addr) const {
  auto owner = owner_of(addr);
  return owner && *owner == host;
}

void Network::set_link(HostId a, HostId b, LinkModel model) {
  expects(model.latency_ms >= 0, "negative link latency");
  expects(model.loss_rate >= 0.0 && model.loss_rate <= 1.0, "loss rate outside [0,1]");
  auto ia = static_cast<std::uint32_t>(a);
  auto ib = static_cast<std::uint32_t>(b);
  links_[{ia, ib}] = model;
  links_[{ib, ia}] = model;
}

const LinkModel& Network::link(HostId from, HostId to) const {
  auto it = links_.find({static_cast<std::uint32_t>(from), static_cast<std::uint32_t>(to)});
  return it == links_.end() ? default_link_ : it->second;
}

TransmitResult Network::transmit(HostId from, Packet pkt) {
  auto& sender = entry(from);
  ++sender.sent;
  auto to = owner_of(pkt.ip.dst);
  if (!to) {
    if (trace_.enabled()) trace_.record(now_, sender.name, TraceDir::NoRoute, pkt.summary());
    return TransmitResult::NoRoute;
  }
  const LinkModel& model = link(from, *to);
  if (!owns(from, pkt.ip.src) && !model.spoofing_permitted) {
    ++filtered_;
    if (trace_.enabled()) trace_.record(now_, sender.name, TraceDir::Filtered, pkt.summary());
    return TransmitResult::Filtered;
  }
  if (model.loss_rate > 0.0 && loss_rng_.bernoulli(model.loss_rate)) {
    ++lost_;
    if (trace_.enabled()) trace_.record(now_, sender.name, TraceDir::Lost, pkt.summary());
    return TransmitResult::Lost;
  }
  if (trace_.enabled()) trace_.record(now_, sender.name, TraceDir::Tx, pkt.summary());
  queue_.schedule(now_ + model.latency_ms, now_, Deliver{std::move(pkt), *to});
  return TransmitResult::Scheduled;
}

void Network::set_timer(HostId host, SimTime at, std::uint64_t token) {
  entry(host);
  queue_.schedule(at, now_, Timer{host, token});
}

bool Network::step() {
  if (queue_.empty()) return false;
  Event ev = queue_.pop();
  now_ = ev.fire_time;
  ++processed_;
  if (auto* d = std::get_if<Deliver>(&ev.action)) {
    auto& dest = entry(d->to);
    if (trace_.enabled()) trace_.record(now_, dest.name, TraceDir::Rx, d->packet.summary());
    // The receiver gets its own copy; nothing it does reaches other events.
    const Packet delivered = std::move(d->packet);
    dest.node->on_packet(delivered, *this);
  } else {
    auto& t = std::get<Timer>(ev.action);
    entry(t.host).node->on_timer(t.token, *this);
  }
  return true;
}

void Network::run_until(SimTime t) {
  expects(t >= now_, "run_until into the past");
  while (!queue_.empty() && queue_.next_time() <= t) step();
  now_ = t;
}

void Network::run() {
  while (step()) {
  }
}

void Network::note(HostId host, std::string_view detail) {
  trace_.record(now_, entry(host).name, TraceDir::Note, detail);
}

const std::string& Network::host_name(HostId host) const { return entry(host).name; }

std::uint64_t Network::packets_sent(HostId host) const { return entry(host).sent; }

Network::HostEntry& Network::entry(HostId id) {
  auto i = static_cast<std::size_t>(id);
  expects(i < hosts_.size(), "unknown host id");
  return hosts_[i];
}

const Network::HostEntry& Network::entry(HostId id) const {
  auto i = static_cast<std::size_t>(id);
  expects(i < hosts_.size(), "unknown host id");
  return hosts_[i];
}

}  // namespace offpath::net
