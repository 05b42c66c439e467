#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "offpath/net/address.hpp"
#include "offpath/net/packet.hpp"
#include "offpath/net/rng.hpp"
#include "offpath/net/time.hpp"
#include "offpath/net/trace.hpp"

namespace offpath::net {

struct LinkModel {
  SimTime latency_ms = 10;
  double loss_rate = 0.0;
  // False models an AS that applies ingress filtering.
  bool spoofing_permitted = false;
};

class Network;

class Node {
 public:
  virtual ~Node() = default;
  virtual void on_packet(const Packet& pkt, Network& net) = 0;
  virtual void on_timer(std::uint64_t /*token*/, Network& /*net*/) {}
};

struct Deliver {
  Packet packet;
  HostId to;
};

struct Timer {
  HostId host;
  std::uint64_t token = 0;
};

using EventAction = std::variant<Deliver, Timer>;

struct Event {
  SimTime fire_time = 0;
  std::uint64_t seqno = 0;
  EventAction action;
};

// Min-queue on (fire_time, seqno). seqno is the insertion counter, so events
// due at the same millisecond fire in the order they were scheduled.
class EventQueue {
 public:
  // Throws ContractViolation when fire_time < now.
  std::uint64_t schedule(SimTime fire_time, SimTime now, EventAction action);

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  SimTime next_time() const { return heap_.front().fire_time; }
  Event pop();

 private:
  std::vector<Event> heap_;
  std::uint64_t next_seqno_ = 0;
};

enum class TransmitResult { Scheduled, Lost, Filtered, NoRoute };

class Network {
 public:
  explicit Network(std::uint64_t seed);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  HostId add_host(std::string name, Node& node);
  void assign_address(HostId host, Ipv4Addr addr);
  std::optional<HostId> owner_of(Ipv4Addr addr) const;
  bool owns(HostId host, Ipv4Addr addr) const;

  // Sets the model for both directions between a and b.
  void set_link(HostId a, HostId b, LinkModel model);
  void set_default_link(LinkModel model) { default_link_ = model; }
  const LinkModel& link(HostId from, HostId to) const;

  TransmitResult transmit(HostId from, Packet pkt);
  void set_timer(HostId host, SimTime at, std::uint64_t token);

  SimTime now() const { return now_; }
  bool step();
  // Processes every event due at or before t, then sets the clock to t.
  void run_until(SimTime t);
  void run();

  Trace& trace() { return trace_; }
  void note(HostId host, std::string_view detail);
  const std::string& host_name(HostId host) const;

  std::uint64_t packets_sent(HostId host) const;
  std::uint64_t packets_lost() const { return lost_; }
  std::uint64_t packets_filtered() const { return filtered_; }
  std::uint64_t events_processed() const { return processed_; }

 private:
  struct HostEntry {
    std::string name;
    Node* node = nullptr;
    std::uint64_t sent = 0;
  };

  HostEntry& entry(HostId id);
  const HostEntry& entry(HostId id) const;

  std::vector<HostEntry> hosts_;
  std::unordered_map<std::uint32_t, HostId> owners_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, LinkModel> links_;
  LinkModel default_link_;
  EventQueue queue_;
  Rng loss_rng_;
  Trace trace_;
  SimTime now_ = 0;
  std::uint64_t lost_ = 0;
  std::uint64_t filtered_ = 0;
  std::uint64_t processed_ = 0;
};

}  // namespace offpath::net
