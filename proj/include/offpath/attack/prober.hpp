#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "offpath/attack/observation.hpp"
#include "offpath/net/simulator.hpp"

namespace offpath::attack {

// The attacker's own machine: collects echo replies sent to its addresses.
class AttackerHost : public net::Node {
 public:
  void on_packet(const net::Packet& pkt, net::Network& net) override;

  std::optional<std::uint16_t> take_reply(std::uint32_t key);
  std::uint64_t echo_replies() const { return echo_replies_; }
  std::uint64_t other_packets() const { return other_packets_; }

 private:
  std::unordered_map<std::uint32_t, std::uint16_t> replies_;
  std::uint64_t echo_replies_ = 0;
  std::uint64_t other_packets_ = 0;
};

// Sliding one-second packet budget.
class RateGovernor {
 public:
  explicit RateGovernor(int pps = 300) : pps_(pps) {}

  void set_rate(int pps) { pps_ = pps; }
  int rate() const { return pps_; }
  // Earliest time >= now at which n more packets fit in the budget.
  net::SimTime earliest(net::SimTime now, std::size_t n);
  void record(net::SimTime now, std::size_t n);
  // Largest count over any 1000 ms span seen so far.
  std::size_t peak() const { return peak_; }

 private:
  void expire(net::SimTime now);

  int pps_;
  std::deque<std::pair<net::SimTime, std::size_t>> sent_;
  std::size_t in_window_ = 0;
  std::size_t peak_ = 0;
};

struct Slot {
  std::vector<net::Packet> triggers;
};

// One observation window, all sent within a single millisecond:
// setup packets, a priming echo, a base echo, then each slot's triggers
// followed by an echo. The per-slot extra is how many additional draws the
// observed counter saw during that slot.
struct Window {
  net::Ipv4Addr observer;
  std::vector<net::Packet> setup;
  std::vector<Slot> slots;

  std::size_t packet_count() const;
};

struct Ticket {
  net::SimTime sent_at = 0;
  net::SimTime deadline = 0;
  // Its reply carries no signal, but if the request was lost the base echo
  // absorbed the idle-time increment instead.
  std::uint32_t prime_key = 0;
  std::vector<std::uint32_t> echo_keys;
};

struct WindowResult {
  net::SimTime sent_at = 0;
  bool complete = false;
  // One entry per slot; empty when the window is incomplete.
  std::vector<std::uint16_t> extras;

  bool any_positive(std::uint16_t threshold = 1) const;
  std::optional<std::size_t> first_positive(std::uint16_t threshold = 1) const;
};

struct ScanHit {
  std::size_t index = 0;
  // Position of the positive window within the batch, and its slot.
  std::size_t window = 0;
  std::size_t slot = 0;
  WindowResult result;
};

class Prober {
 public:
  Prober(net::Network& net, net::HostId self, AttackerHost& host, net::Ipv4Addr server);

  net::Network& network() { return net_; }
  net::SimTime now() const { return net_.now(); }
  RateGovernor& governor() { return governor_; }

  void set_rate(int pps) { governor_.set_rate(pps); }
  void set_reply_wait(net::SimTime rtt, net::SimTime margin) {
    rtt_ = rtt;
    margin_ = margin;
  }
  net::SimTime reply_wait() const { return rtt_ + margin_; }
  // Echo requests used by probes carry this id in the high half of the key.
  net::Packet echo(net::Ipv4Addr from, std::uint32_t* key_out);

  // Sends raw packets immediately, subject to the rate budget.
  void send_raw(std::span<const net::Packet> pkts);
  std::vector<Ticket> send(std::span<const Window> batch);
  Ticket send(const Window& w) { return send(std::span<const Window>(&w, 1)).front(); }
  WindowResult collect(const Ticket& t);
  // Sends, waits for the replies and returns the result.
  WindowResult probe(const Window& w);

  // Pipelined: sends batches make(0..count-1) as fast as the budget allows and
  // returns the first positive slot. Incomplete batches are resent up to
  // `resends` times each.
  std::optional<ScanHit> scan(std::size_t count,
                              const std::function<std::vector<Window>(std::size_t)>& make,
                              net::SimTime deadline, int resends = 2,
                              std::uint16_t threshold = 1);

  void wait_until(net::SimTime t);
  // Connection-level challenge ACK pacing: the next probe that could elicit a
  // challenge ACK must reach the server at least `interval` after the last
  // one that might have.
  void note_possible_challenge(net::SimTime sent_at) { last_possible_challenge_ = sent_at; }
  void wait_for_challenge_budget(net::SimTime interval);

  bool timed_out(net::SimTime deadline) const { return net_.now() > deadline; }

 private:
  net::Network& net_;
  net::HostId self_;
  AttackerHost& host_;
  net::Ipv4Addr server_;
  RateGovernor governor_;
  std::uint32_t next_key_ = 1;
  net::SimTime rtt_ = 400;
  net::SimTime margin_ = 50;
  std::optional<net::SimTime> last_possible_challenge_;
};

}  // namespace offpath::attack
