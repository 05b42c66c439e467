#include "offpath/harness/scenario.hpp"

#include <algorithm>
#include <memory>
#include <unordered_set>

#include <fmt/format.h>

#include "offpath/contract.hpp"
#include "offpath/net/seq.hpp"

namespace offpath::harness {

using attack::FailureReason;
using attack::PhaseRecord;

const std::vector<std::string>& phase_names() {
  static const std::vector<std::string> names{"rtt",  "downgrade", "collision", "enumerate",
                                              "port", "seq",       "locate",    "exact_seq",
                                              "ack",  "reset",     "inject"};
  return names;
}

namespace {

// Pings the server from a handful of its own addresses at a steady rate,
// disturbing whichever hash counters those flows map to.
class NoiseHost : public net::Node {
 public:
  NoiseHost(const NoiseSpec& spec, net::Ipv4Addr server, std::uint64_t seed)
      : spec_(spec), server_(server), rng_(seed) {}

  void attach(net::Network& net) {
    id_ = net.add_host("noise", *this);
    for (std::size_t i = 0; i < spec_.addresses; ++i)
      net.assign_address(id_, net::Ipv4Addr{spec_.base.value + static_cast<std::uint32_t>(i)});
    net.set_timer(id_, net.now() + next_gap(), 0);
  }

  net::HostId id() const { return id_; }

  void on_packet(const net::Packet&, net::Network&) override {}

  void on_timer(std::uint64_t, net::Network& net) override {
    auto from = net::Ipv4Addr{spec_.base.value +
                              static_cast<std::uint32_t>(rng_.uniform(0, spec_.addresses - 1))};
    auto seqno = static_cast<std::uint16_t>(++sent_);
    net.transmit(id_, net::make_icmp_packet(from, server_, net::EchoRequest{0x4e4f, seqno}));
    net.set_timer(id_, net.now() + next_gap(), 0);
  }

 private:
  net::SimTime next_gap() {
    double mean = 1000.0 / spec_.rate_pps;
    return std::max<net::SimTime>(1, static_cast<net::SimTime>(rng_.exponential(mean) + 0.5));
  }

  NoiseSpec spec_;
  net::Ipv4Addr server_;
  net::Rng rng_;
  net::HostId id_{};
  std::uint64_t sent_ = 0;
};

net::LinkModel link_model(const LinkSpec& spec, net::Rng& draw) {
  net::LinkModel m;
  m.latency_ms = static_cast<net::SimTime>(
      draw.uniform(static_cast<std::uint64_t>(spec.latency.min_ms), static_cast<std::uint64_t>(spec.latency.max_ms)));
  m.loss_rate = spec.loss_rate;
  m.spoofing_permitted = spec.spoofing_permitted;
  return m;
}

victim::HostConfig server_config(const ScenarioConfig& cfg) {
  victim::HostConfig h;
  h.name = "server";
  h.addresses = {cfg.server};
  h.policy = cfg.policy;
  h.ipid_tick_ms = cfg.ipid_tick_ms;
  h.pmtud = cfg.pmtud;
  h.endpoint = cfg.endpoint;
  h.destination_counter_idle_ms = cfg.destination_counter_idle_ms;
  return h;
}

victim::HostConfig client_config(const ScenarioConfig& cfg) {
  victim::HostConfig h;
  h.name = "client";
  h.addresses = {cfg.client};
  h.ipid_tick_ms = cfg.ipid_tick_ms;
  h.endpoint.listening_ports = {};
  h.endpoint.rst_on_unexpected_synack = cfg.client_rst_on_unexpected_synack;
  return h;
}

// Server, client, optional noise source and the attacker on one network,
// plus the harness's view of victim ground truth.
class World {
 public:
  World(const ScenarioConfig& cfg, std::ostream* trace)
      : cfg_(cfg),
        draw_(net::derive_seed(cfg.seed, "scenario")),
        net_(cfg.seed),
        server_(server_config(cfg), net::derive_seed(cfg.seed, "server")),
        client_(client_config(cfg), net::derive_seed(cfg.seed, "client")) {
    net_.trace().attach(trace);
    server_.attach(net_);
    client_.attach(net_);
    net_.set_link(server_.id(), client_.id(), link_model(cfg.client_server, draw_));
    server_.set_data_hook([this](const victim::FourTuple&, std::string_view data, net::Network& n) {
      deliveries_.emplace_back(n.now(), std::string(data));
    });
    if (cfg.noise.rate_pps > 0) {
      noise_ = std::make_unique<NoiseHost>(cfg.noise, cfg.server, net::derive_seed(cfg.seed, "noise"));
      noise_->attach(net_);
      net_.set_link(noise_->id(), server_.id(), net::LinkModel{10, 0.0, false});
    }
    attacker_link_ = link_model(cfg.attacker_server, draw_);
    attacker_client_link_ = link_model(cfg.attacker_client, draw_);
  }

  void warm_up() {
    const auto port = cfg_.attack.server_port;
    if (cfg_.client_connects) {
      client_tuple_ = client_.connect(net_, cfg_.server, port);
      server_tuple_ = victim::FourTuple{cfg_.server, port, cfg_.client, client_tuple_->local_port};
    }
    net_.run_until(std::min<net::SimTime>(500, cfg_.attack_start_ms));
    if (connection() && !cfg_.banner.empty()) server_.send(net_, *server_tuple_, cfg_.banner);
    net_.run_until(std::min<net::SimTime>(1000, cfg_.attack_start_ms));
    if (connection() && client_.tcp().find(*client_tuple_) && !cfg_.request.empty())
      client_.send(net_, *client_tuple_, cfg_.request);
    if (connection() && cfg_.client_send_interval_ms > 0) {
      client_.set_timer_hook([this](std::uint64_t, net::Network& n) {
        if (client_.tcp().find(*client_tuple_)) client_.send(n, *client_tuple_, ".");
        n.set_timer(client_.id(), n.now() + cfg_.client_send_interval_ms, 1);
      });
      net_.set_timer(client_.id(), net_.now() + cfg_.client_send_interval_ms, 1);
    }
    net_.run_until(cfg_.attack_start_ms);
    established_ = connection() != nullptr;
  }

  // An address in the pool prefix whose echo-reply counter is the one the
  // server uses for TCP to the client.
  net::Ipv4Addr true_collider(const std::unordered_set<std::uint32_t>& avoid) {
    auto target = server_.ipid().index_for(cfg_.server, cfg_.client, net::IpProto::Tcp);
    for (;;) {
      auto a = cfg_.pool_prefix.at(draw_.uniform(0, cfg_.pool_prefix.size() - 1));
      if (avoid.contains(a.value)) continue;
      if (server_.ipid().index_for(cfg_.server, a, net::IpProto::Icmp) == target) return a;
    }
  }

  std::vector<net::Ipv4Addr> draw_pool(std::size_t n) {
    std::vector<net::Ipv4Addr> pool;
    std::unordered_set<std::uint32_t> seen;
    pool.reserve(n);
    while (pool.size() < n) {
      auto a = cfg_.pool_prefix.at(draw_.uniform(0, cfg_.pool_prefix.size() - 1));
      if (seen.insert(a.value).second) pool.push_back(a);
    }
    return pool;
  }

  void start_attacker(std::vector<net::Ipv4Addr> pool) {
    attack::AttackConfig a = cfg_.attack;
    a.server = cfg_.server;
    a.client = cfg_.client;
    a.self = cfg_.attacker;
    a.addr_pool = std::move(pool);
    attacker_ = std::make_unique<attack::Attacker>(net_, std::move(a), net::derive_seed(cfg_.seed, "attacker"));
    net_.set_link(attacker_->host_id(), server_.id(), attacker_link_);
    net_.set_link(attacker_->host_id(), client_.id(), attacker_client_link_);
    attacker_->set_phase_hook([this](const PhaseRecord& rec) { return check(rec); });
  }

  const victim::TcpConnState* connection() const {
    return server_tuple_ ? server_.tcp().find(*server_tuple_) : nullptr;
  }

  // Ground-truth audit of each phase's output.
  std::optional<FailureReason> check(const PhaseRecord& rec) {
    const auto* c = connection();
    const std::string& n = rec.name;
    if (n == "downgrade") {
      if (cfg_.kind == ScenarioKind::DowngradeOnly && !df_cleared()) return FailureReason::NotDowngraded;
      return std::nullopt;
    }
    if (!rec.success || !rec.inferred) return std::nullopt;
    auto v = *rec.inferred;
    if (n == "collision") {
      auto a = net::Ipv4Addr{static_cast<std::uint32_t>(v)};
      if (server_.ipid().index_for(cfg_.server, a, net::IpProto::Icmp) !=
          server_.ipid().index_for(cfg_.server, cfg_.client, net::IpProto::Tcp))
        return FailureReason::WrongInference;
    } else if (n == "port") {
      if (!server_tuple_ || v != server_tuple_->remote_port) return FailureReason::WrongInference;
    } else if (n == "seq" || n == "exact_seq" || n == "locate" || n == "ack") {
      if (!c) return established_ ? FailureReason::ConnectionReset : FailureReason::WrongInference;
      auto x = static_cast<std::uint32_t>(v);
      bool right = true;
      if (n == "seq") right = net::seq_in_window(x, c->rcv_nxt, c->rcv_wnd);
      if (n == "exact_seq") right = x == c->rcv_nxt;
      if (n == "locate") {
        std::uint32_t behind = c->snd_una - x;
        right = behind > c->snd_max_wnd && behind < net::kHalfSeqSpace;
      }
      if (n == "ack") {
        std::uint32_t behind = c->snd_una - x;
        right = behind <= c->snd_max_wnd ||
                static_cast<std::uint32_t>(x - c->snd_una) <= c->snd_nxt - c->snd_una;
      }
      if (!right) return FailureReason::WrongInference;
    } else if (n == "reset") {
      if (c) return FailureReason::Stale;
    }
    return std::nullopt;
  }

  // Injection succeeds when the server application got exactly the payload.
  void audit_injection(attack::AttackReport& report) const {
    auto it = std::find_if(report.phases.begin(), report.phases.end(),
                           [](const auto& p) { return p.name == "inject"; });
    if (it == report.phases.end() || !it->success) return;
    bool delivered = std::any_of(deliveries_.begin(), deliveries_.end(), [&](const auto& d) {
      return d.first >= it->start_ms && d.second == cfg_.attack.payload;
    });
    if (!delivered) {
      it->success = false;
      it->reason = FailureReason::BadAck;
    }
  }

  bool df_cleared() const {
    const auto* r = server_.routes().find(cfg_.client);
    return r && r->df_cleared;
  }

  RunResult finish() {
    RunResult out;
    out.seed = cfg_.seed;
    out.kind = cfg_.kind;
    if (attacker_) {
      out.report = attacker_->report();
      audit_injection(out.report);
      out.packets_attacker = net_.packets_sent(attacker_->host_id());
      out.truth.attacker_foreign_packets = attacker_->host().other_packets();
      out.truth.attacker_peak_rate = attacker_->prober().governor().peak();
    }
    out.packets_server = net_.packets_sent(server_.id());
    out.packets_client = net_.packets_sent(client_.id());
    out.packets_lost = net_.packets_lost();
    out.events = net_.events_processed();
    out.enumerated = enumerated_;
    out.end_ms = net_.now();
    auto& t = out.truth;
    t.connection_established = established_;
    if (server_tuple_) t.client_port = server_tuple_->remote_port;
    if (const auto* c = connection()) {
      t.connection_alive = true;
      t.rcv_nxt = c->rcv_nxt;
      t.rcv_wnd = c->rcv_wnd;
      t.snd_una = c->snd_una;
      t.snd_nxt = c->snd_nxt;
      t.snd_max_wnd = c->snd_max_wnd;
    }
    t.df_cleared = df_cleared();
    if (server_tuple_) t.app_received = server_.tcp().app_received(*server_tuple_);
    t.server_tcp_hash_draws = server_.ipid().stats().hash_draws_tcp;
    t.server_challenge_acks = server_.tcp().stats().challenge_acks_sent;
    t.server_duplicate_acks = server_.tcp().stats().duplicate_acks;
    return out;
  }

  const ScenarioConfig& cfg_;
  net::Rng draw_;
  net::Network net_;
  victim::LinuxHost server_;
  victim::LinuxHost client_;
  std::unique_ptr<NoiseHost> noise_;
  std::unique_ptr<attack::Attacker> attacker_;
  net::LinkModel attacker_link_;
  net::LinkModel attacker_client_link_;
  std::optional<victim::FourTuple> client_tuple_;
  std::optional<victim::FourTuple> server_tuple_;
  bool established_ = false;
  std::vector<std::pair<net::SimTime, std::string>> deliveries_;
  std::vector<net::Ipv4Addr> enumerated_;
};

void run_pipeline(World& w) {
  const auto& cfg = w.cfg_;
  auto& a = *w.attacker_;
  if (!a.measure_rtt().ok()) return;
  if (!a.downgrade(cfg.client).ok() || cfg.kind == ScenarioKind::DowngradeOnly) return;

  if (cfg.collision_strategy == CollisionStrategy::Enumerate) {
    auto found = a.enumerate_victim_clients(cfg.enumerate_first, cfg.enumerate_count,
                                            cfg.enumerate_time_limit_ms);
    // Enumeration uses the attacker's own address as observer; later phases
    // need it to collide with the target client.
    if (found.ok()) w.enumerated_ = *found.value;
    if (cfg.kind == ScenarioKind::CollisionScan || !found.ok()) return;
    if (std::find(found.value->begin(), found.value->end(), cfg.client) == found.value->end()) return;
  }
  net::Ipv4Addr collider = cfg.attacker;
  if (cfg.collision_strategy == CollisionStrategy::Pool) {
    auto c = a.find_colliding_address(a.config().addr_pool);
    if (!c.ok() || cfg.kind == ScenarioKind::CollisionScan) return;
    collider = *c.value;
  }
  auto port = a.detect_connection_port(collider);
  if (!port.ok() || cfg.kind == ScenarioKind::PortDetect) return;
  auto seq = a.infer_acceptable_seq(collider, *port.value);
  if (!seq.ok()) return;
  auto ack_c = a.locate_challenge_window(collider, *port.value, *seq.value);
  if (!ack_c.ok()) return;
  auto exact = a.detect_exact_seq(collider, *port.value, *seq.value, *ack_c.value);
  if (!exact.ok()) return;
  if (cfg.kind == ScenarioKind::FullReset) {
    a.execute_reset(collider, *port.value, *exact.value, *ack_c.value);
    return;
  }
  auto una = a.detect_acceptable_ack(collider, *port.value, *exact.value, *ack_c.value);
  if (!una.ok()) return;
  a.execute_injection(*port.value, *exact.value, *una.value);
}

// Runs `phase` alone; earlier outputs come from ground truth.
void run_single_phase(World& w, const std::string& phase) {
  const auto& cfg = w.cfg_;
  auto& a = *w.attacker_;
  if (!a.measure_rtt().ok() || phase == "rtt") return;
  if (!a.downgrade(cfg.client).ok() || phase == "downgrade") return;
  if (phase == "collision") {
    a.find_colliding_address(a.config().addr_pool);
    return;
  }
  if (phase == "enumerate") {
    auto found =
        a.enumerate_victim_clients(cfg.enumerate_first, cfg.enumerate_count, cfg.enumerate_time_limit_ms);
    if (found.ok()) w.enumerated_ = *found.value;
    return;
  }
  auto collider = a.config().addr_pool.front();
  if (phase == "port") {
    a.detect_connection_port(collider);
    return;
  }
  const auto* c = w.connection();
  if (!c) return;
  auto port = w.server_tuple_->remote_port;
  if (phase == "seq") {
    a.infer_acceptable_seq(collider, port);
    return;
  }
  auto seq_acceptable = static_cast<std::uint32_t>(c->rcv_nxt + w.draw_.uniform(0, c->rcv_wnd));
  if (phase == "locate") {
    a.locate_challenge_window(collider, port, seq_acceptable);
    return;
  }
  std::uint32_t ack_challenge = c->snd_una - (std::uint32_t{1} << 30);
  if (phase == "exact_seq") {
    a.detect_exact_seq(collider, port, seq_acceptable, ack_challenge);
    return;
  }
  if (phase == "ack") {
    a.detect_acceptable_ack(collider, port, c->rcv_nxt, ack_challenge);
    return;
  }
  if (phase == "reset") {
    a.execute_reset(collider, port, c->rcv_nxt, ack_challenge);
    return;
  }
  if (phase == "inject") {
    a.execute_injection(port, c->rcv_nxt, c->snd_una);
    return;
  }
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
  if (opts.phase) {
    const auto& names = phase_names();
    expects(std::find(names.begin(), names.end(), *opts.phase) != names.end(), "unknown phase name");
  }
  World w(cfg, opts.trace);
  w.warm_up();
  bool prepared = opts.phase && *opts.phase != "rtt" && *opts.phase != "downgrade" &&
                  *opts.phase != "collision" && *opts.phase != "enumerate";
  if (prepared) {
    w.start_attacker({w.true_collider({})});
    run_single_phase(w, *opts.phase);
  } else {
    w.start_attacker(w.draw_pool(cfg.pool_size));
    if (opts.phase) run_single_phase(w, *opts.phase);
    else run_pipeline(w);
  }
  return w.finish();
}

JitterResult run_jitter_experiment(const ScenarioConfig& cfg, int probes, net::SimTime span_ms) {
  World w(cfg, nullptr);
  w.warm_up();
  w.start_attacker({w.true_collider({})});
  auto& a = *w.attacker_;
  JitterResult out;
  if (!a.measure_rtt().ok() || !a.downgrade(cfg.client).ok()) return out;
  const auto* c = w.connection();
  expects(c != nullptr, "jitter experiment needs a live connection");
  auto collider = a.config().addr_pool.front();
  auto port = w.server_tuple_->remote_port;
  std::uint32_t ack_challenge = c->snd_una - (std::uint32_t{1} << 30);
  auto& net = w.net_;
  const auto& stats = w.server_.ipid().stats();

  net.run_until(net.now() + 1000);
  auto before = stats.hash_draws_tcp;
  out.below = a.measure_jitter(collider, port, c->rcv_nxt - 1, ack_challenge, probes, span_ms);
  out.below_draws = stats.hash_draws_tcp - before;

  net.run_until(net.now() + 1000);
  before = stats.hash_draws_tcp;
  out.inside = a.measure_jitter(collider, port, c->rcv_nxt, ack_challenge, probes, span_ms);
  out.inside_draws = stats.hash_draws_tcp - before;
  return out;
}

}  // namespace offpath::harness
