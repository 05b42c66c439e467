#include "offpath/harness/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace offpath::harness {

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::DowngradeOnly: return "DowngradeOnly";
    case ScenarioKind::CollisionScan: return "CollisionScan";
    case ScenarioKind::PortDetect: return "PortDetect";
    case ScenarioKind::FullReset: return "FullReset";
    case ScenarioKind::FullInject: return "FullInject";
    case ScenarioKind::PatchedControl: return "PatchedControl";
  }
  return "?";
}

std::optional<ScenarioKind> parse_kind(std::string_view name) {
  for (auto k : {ScenarioKind::DowngradeOnly, ScenarioKind::CollisionScan, ScenarioKind::PortDetect,
                 ScenarioKind::FullReset, ScenarioKind::FullInject, ScenarioKind::PatchedControl}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

namespace {

// Strict reader: every key must be known and every scalar must have the
// expected type. Errors accumulate instead of stopping at the first one.
class Reader {
 public:
  explicit Reader(std::vector<ConfigError>& errors) : errors_(errors) {}

  void error(const std::string& path, const std::string& msg) { errors_.push_back({path, msg}); }

  bool section(const YAML::Node& node, const std::string& path,
               std::initializer_list<const char*> allowed) {
    if (!node.IsMap()) {
      error(path, "expected a mapping");
      return false;
    }
    std::set<std::string> known(allowed.begin(), allowed.end());
    for (const auto& kv : node) {
      auto key = kv.first.as<std::string>();
      if (!known.contains(key)) error(join(path, key), "unknown key");
    }
    return true;
  }

  template <typename T>
  void get(const YAML::Node& parent, const std::string& path, const char* key, T& out) {
    auto node = parent[key];
    if (!node) return;
    try {
      out = node.as<T>();
    } catch (const YAML::Exception&) {
      error(join(path, key), fmt::format("expected {}", type_name<T>()));
    }
  }

  void address(const YAML::Node& parent, const std::string& path, const char* key,
               net::Ipv4Addr& out) {
    std::string text;
    if (!parent[key]) return;
    get(parent, path, key, text);
    if (auto a = net::Ipv4Addr::parse(text)) out = *a;
    else error(join(path, key), fmt::format("invalid IPv4 address '{}'", text));
  }

  void latency(const YAML::Node& parent, const std::string& path, LatencySpec& out) {
    auto node = parent["latency_ms"];
    if (!node) return;
    auto p = join(path, "latency_ms");
    if (node.IsScalar()) {
      net::SimTime v = 0;
      get(parent, path, "latency_ms", v);
      out = {v, v};
      return;
    }
    if (!section(node, p, {"min", "max"})) return;
    get(node, p, "min", out.min_ms);
    get(node, p, "max", out.max_ms);
  }

  void link(const YAML::Node& parent, const std::string& path, const char* key, LinkSpec& out) {
    auto node = parent[key];
    if (!node) return;
    auto p = join(path, key);
    if (!section(node, p, {"latency_ms", "loss_rate", "spoofing_permitted"})) return;
    latency(node, p, out.latency);
    get(node, p, "loss_rate", out.loss_rate);
    get(node, p, "spoofing_permitted", out.spoofing_permitted);
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  template <typename T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "a list";
  }

  std::vector<ConfigError>& errors_;
};

void read_topology(Reader& r, const YAML::Node& n, ScenarioConfig& cfg) {
  if (!r.section(n, "topology", {"server", "client", "attacker", "attacker_pool", "router", "links", "noise"}))
    return;
  r.address(n, "topology", "server", cfg.server);
  r.address(n, "topology", "client", cfg.client);
  r.address(n, "topology", "attacker", cfg.attacker);
  r.address(n, "topology", "router", cfg.attack.router);
  if (auto pool = n["attacker_pool"]) {
    if (r.section(pool, "topology.attacker_pool", {"prefix", "size"})) {
      std::string text;
      if (pool["prefix"]) {
        r.get(pool, "topology.attacker_pool", "prefix", text);
        if (auto p = net::Ipv4Prefix::parse(text)) cfg.pool_prefix = *p;
        else r.error("topology.attacker_pool.prefix", fmt::format("invalid prefix '{}'", text));
      }
      r.get(pool, "topology.attacker_pool", "size", cfg.pool_size);
    }
  }
  if (auto links = n["links"]) {
    if (r.section(links, "topology.links", {"client_server", "attacker_server", "attacker_client"})) {
      r.link(links, "topology.links", "client_server", cfg.client_server);
      r.link(links, "topology.links", "attacker_server", cfg.attacker_server);
      r.link(links, "topology.links", "attacker_client", cfg.attacker_client);
    }
  }
  if (auto noise = n["noise"]) {
    if (r.section(noise, "topology.noise", {"rate_pps", "addresses", "base"})) {
      r.get(noise, "topology.noise", "rate_pps", cfg.noise.rate_pps);
      r.get(noise, "topology.noise", "addresses", cfg.noise.addresses);
      r.address(noise, "topology.noise", "base", cfg.noise.base);
    }
  }
}

void read_victim(Reader& r, const YAML::Node& n, ScenarioConfig& cfg) {
  const std::string p = "victim";
  if (!r.section(n, p, {"policy", "ipid_tick_ms", "min_pmtu", "strict_embedded_validation",
                        "listening_ports", "rst_on_unexpected_synack", "challenge_ack_interval_ms",
                        "global_challenge_ack_per_sec", "rcv_wnd", "snd_max_wnd",
                        "half_open_timeout_ms", "destination_counter_idle_ms"}))
    return;
  if (n["policy"]) {
    std::string name;
    r.get(n, p, "policy", name);
    if (auto pol = victim::parse_policy(name)) cfg.policy = *pol;
    else r.error("victim.policy", fmt::format("unknown policy '{}'", name));
  }
  r.get(n, p, "ipid_tick_ms", cfg.ipid_tick_ms);
  r.get(n, p, "min_pmtu", cfg.pmtud.min_pmtu);
  r.get(n, p, "strict_embedded_validation", cfg.pmtud.validate_embedded_provenance);
  if (n["listening_ports"]) {
    std::vector<std::uint16_t> ports;
    r.get(n, p, "listening_ports", ports);
    cfg.endpoint.listening_ports = {ports.begin(), ports.end()};
  }
  r.get(n, p, "rst_on_unexpected_synack", cfg.endpoint.rst_on_unexpected_synack);
  r.get(n, p, "challenge_ack_interval_ms", cfg.endpoint.challenge_ack_interval_ms);
  r.get(n, p, "global_challenge_ack_per_sec", cfg.endpoint.global_challenge_ack_per_sec);
  r.get(n, p, "rcv_wnd", cfg.endpoint.rcv_wnd);
  r.get(n, p, "snd_max_wnd", cfg.endpoint.snd_max_wnd);
  r.get(n, p, "half_open_timeout_ms", cfg.endpoint.half_open_timeout_ms);
  r.get(n, p, "destination_counter_idle_ms", cfg.destination_counter_idle_ms);
}

void read_client(Reader& r, const YAML::Node& n, ScenarioConfig& cfg) {
  const std::string p = "client";
  if (!r.section(n, p, {"connect", "rst_on_unexpected_synack", "send_interval_ms", "banner", "request"}))
    return;
  r.get(n, p, "connect", cfg.client_connects);
  r.get(n, p, "rst_on_unexpected_synack", cfg.client_rst_on_unexpected_synack);
  r.get(n, p, "send_interval_ms", cfg.client_send_interval_ms);
  r.get(n, p, "banner", cfg.banner);
  r.get(n, p, "request", cfg.request);
}

void read_attack(Reader& r, const YAML::Node& n, ScenarioConfig& cfg) {
  const std::string p = "attack";
  auto& a = cfg.attack;
  if (!r.section(n, p, {"start_ms", "server_port", "probe_rate_pps", "scan_rate_pps",
                        "port_scan_rate_pps", "port_range", "retry_on_ambiguity",
                        "embedded_source", "forged_mtu", "collision_strategy", "enumerate",
                        "assumed_rcv_wnd", "collision_addrs_per_window", "port_block",
                        "port_blocks_per_window", "seq_block", "seq_blocks_per_window",
                        "trigger_copies", "jitter_probes", "jitter_interval_ms",
                        "reply_margin_ms", "payload", "phase_timeout_ms"}))
    return;
  r.get(n, p, "start_ms", cfg.attack_start_ms);
  r.get(n, p, "server_port", a.server_port);
  r.get(n, p, "probe_rate_pps", a.probe_rate_pps);
  r.get(n, p, "scan_rate_pps", a.scan_rate_pps);
  r.get(n, p, "port_scan_rate_pps", a.port_scan_rate_pps);
  if (auto range = n["port_range"]) {
    std::vector<std::uint16_t> v;
    r.get(n, p, "port_range", v);
    if (v.size() == 2) {
      a.port_lo = v[0];
      a.port_hi = v[1];
    } else {
      r.error("attack.port_range", "expected [lo, hi]");
    }
  }
  r.get(n, p, "retry_on_ambiguity", a.retry_on_ambiguity);
  if (n["embedded_source"]) {
    std::string s;
    r.get(n, p, "embedded_source", s);
    if (s == "synthetic") a.embedded_source = attack::EmbeddedSource::SyntheticEchoReply;
    else if (s == "elicited") a.embedded_source = attack::EmbeddedSource::ElicitedEchoReply;
    else r.error("attack.embedded_source", "expected 'synthetic' or 'elicited'");
  }
  r.get(n, p, "forged_mtu", a.forged_mtu);
  if (n["collision_strategy"]) {
    std::string s;
    r.get(n, p, "collision_strategy", s);
    if (s == "pool") cfg.collision_strategy = CollisionStrategy::Pool;
    else if (s == "enumerate") cfg.collision_strategy = CollisionStrategy::Enumerate;
    else r.error("attack.collision_strategy", "expected 'pool' or 'enumerate'");
  }
  if (auto e = n["enumerate"]) {
    if (r.section(e, "attack.enumerate", {"first", "count", "time_limit_ms"})) {
      r.address(e, "attack.enumerate", "first", cfg.enumerate_first);
      r.get(e, "attack.enumerate", "count", cfg.enumerate_count);
      r.get(e, "attack.enumerate", "time_limit_ms", cfg.enumerate_time_limit_ms);
    }
  }
  r.get(n, p, "assumed_rcv_wnd", a.assumed_rcv_wnd);
  r.get(n, p, "collision_addrs_per_window", a.collision_addrs_per_window);
  r.get(n, p, "port_block", a.port_block);
  r.get(n, p, "port_blocks_per_window", a.port_blocks_per_window);
  r.get(n, p, "seq_block", a.seq_block);
  r.get(n, p, "seq_blocks_per_window", a.seq_blocks_per_window);
  r.get(n, p, "trigger_copies", a.trigger_copies);
  r.get(n, p, "jitter_probes", a.jitter_probes);
  r.get(n, p, "jitter_interval_ms", a.jitter_interval_ms);
  r.get(n, p, "reply_margin_ms", a.reply_margin_ms);
  r.get(n, p, "payload", a.payload);
  if (auto t = n["phase_timeout_ms"]) {
    const std::string tp = "attack.phase_timeout_ms";
    auto& to = a.timeouts;
    if (r.section(t, tp, {"rtt", "downgrade", "collision", "enumerate", "port", "seq", "locate",
                          "exact_seq", "ack", "reset", "inject"})) {
      r.get(t, tp, "rtt", to.rtt);
      r.get(t, tp, "downgrade", to.downgrade);
      r.get(t, tp, "collision", to.collision);
      r.get(t, tp, "enumerate", to.enumerate);
      r.get(t, tp, "port", to.port);
      r.get(t, tp, "seq", to.seq);
      r.get(t, tp, "locate", to.locate);
      r.get(t, tp, "exact_seq", to.exact_seq);
      r.get(t, tp, "ack", to.ack);
      r.get(t, tp, "reset", to.reset);
      r.get(t, tp, "inject", to.inject);
    }
  }
}

}  // namespace

std::vector<ConfigError> validate(const ScenarioConfig& cfg) {
  std::vector<ConfigError> errs;
  auto fail = [&](std::string path, std::string msg) { errs.push_back({std::move(path), std::move(msg)}); };
  if (cfg.server == cfg.client || cfg.server == cfg.attacker || cfg.client == cfg.attacker)
    fail("topology", "server, client and attacker addresses must be distinct");
  if (cfg.pool_prefix.contains(cfg.server) || cfg.pool_prefix.contains(cfg.client) ||
      cfg.pool_prefix.contains(cfg.attacker))
    fail("topology.attacker_pool.prefix", "pool prefix must not contain server, client or attacker");
  if (cfg.pool_size == 0 && cfg.collision_strategy == CollisionStrategy::Pool &&
      cfg.kind != ScenarioKind::DowngradeOnly)
    fail("topology.attacker_pool.size", "pool must not be empty");
  if (cfg.pool_size > cfg.pool_prefix.size() / 2)
    fail("topology.attacker_pool.size", "pool must be at most half the prefix");
  for (auto [name, link] : {std::pair{"client_server", cfg.client_server},
                            std::pair{"attacker_server", cfg.attacker_server},
                            std::pair{"attacker_client", cfg.attacker_client}}) {
    auto p = fmt::format("topology.links.{}", name);
    if (link.latency.min_ms < 0 || link.latency.max_ms < link.latency.min_ms)
      fail(p + ".latency_ms", "latency must satisfy 0 <= min <= max");
    if (link.loss_rate < 0.0 || link.loss_rate > 1.0) fail(p + ".loss_rate", "loss rate must be in [0, 1]");
  }
  if (!cfg.attacker_server.spoofing_permitted)
    fail("topology.links.attacker_server.spoofing_permitted",
         "the attack needs a link that permits spoofing");
  if (cfg.noise.rate_pps < 0) fail("topology.noise.rate_pps", "must be non-negative");
  if (cfg.ipid_tick_ms <= 0) fail("victim.ipid_tick_ms", "must be positive");
  if (cfg.pmtud.min_pmtu == 0) fail("victim.min_pmtu", "must be positive");
  if (cfg.endpoint.listening_ports.empty()) fail("victim.listening_ports", "at least one port required");
  if (cfg.endpoint.challenge_ack_interval_ms <= 0)
    fail("victim.challenge_ack_interval_ms", "must be positive");
  if (cfg.endpoint.rcv_wnd == 0 || cfg.endpoint.rcv_wnd >= (1u << 31))
    fail("victim.rcv_wnd", "must be in [1, 2^31)");
  if (cfg.endpoint.snd_max_wnd == 0 || cfg.endpoint.snd_max_wnd >= (1u << 30))
    fail("victim.snd_max_wnd", "must be in [1, 2^30)");
  const auto& a = cfg.attack;
  if (!cfg.endpoint.listening_ports.contains(a.server_port))
    fail("attack.server_port", "target port is not a listening port");
  if (a.probe_rate_pps <= 0) fail("attack.probe_rate_pps", "must be positive");
  if (a.scan_rate_pps <= 0) fail("attack.scan_rate_pps", "must be positive");
  if (a.port_scan_rate_pps <= 0) fail("attack.port_scan_rate_pps", "must be positive");
  if (a.port_lo > a.port_hi) fail("attack.port_range", "lo must not exceed hi");
  if (a.retry_on_ambiguity < 0) fail("attack.retry_on_ambiguity", "must be non-negative");
  if (a.assumed_rcv_wnd == 0 || a.assumed_rcv_wnd >= (1u << 31))
    fail("attack.assumed_rcv_wnd", "must be in [1, 2^31)");
  if (a.trigger_copies < 1) fail("attack.trigger_copies", "must be at least 1");
  if (a.jitter_probes < 2) fail("attack.jitter_probes", "must be at least 2");
  if (a.jitter_interval_ms <= 0) fail("attack.jitter_interval_ms", "must be positive");
  auto window = [](std::size_t slots, std::size_t per_slot) { return slots * (per_slot + 1) + 2; };
  if (window(a.port_blocks_per_window, a.port_block) > static_cast<std::size_t>(std::max(a.port_scan_rate_pps, 0)))
    fail("attack.port_blocks_per_window", "one port-scan window must fit in the per-second budget");
  if (window(a.seq_blocks_per_window, a.seq_block) > static_cast<std::size_t>(std::max(a.probe_rate_pps, 0)))
    fail("attack.seq_blocks_per_window", "one sequence-scan window must fit in the per-second budget");
  if (a.collision_addrs_per_window * 4 > static_cast<std::size_t>(std::max(a.scan_rate_pps, 0)))
    fail("attack.collision_addrs_per_window", "one collision window must fit in the per-second budget");
  if (static_cast<std::size_t>(a.jitter_probes) + 3 > static_cast<std::size_t>(std::max(a.probe_rate_pps, 0)))
    fail("attack.jitter_probes", "one jitter burst must fit in the per-second budget");
  if (cfg.attack_start_ms < 0) fail("attack.start_ms", "must be non-negative");
  return errs;
}

ConfigLoad parse_config(const std::string& text) {
  ConfigLoad out;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    out.errors.push_back({"", fmt::format("parse error: {}", e.what())});
    return out;
  }
  ScenarioConfig cfg;
  cfg.endpoint.listening_ports = {22};
  Reader r(out.errors);
  if (!r.section(root, "", {"kind", "seed", "topology", "victim", "client", "attack"})) return out;
  if (root["kind"]) {
    std::string k;
    r.get(root, "", "kind", k);
    if (auto kind = parse_kind(k)) cfg.kind = *kind;
    else r.error("kind", fmt::format("unknown scenario kind '{}'", k));
  } else {
    r.error("kind", "required");
  }
  r.get(root, "", "seed", cfg.seed);
  if (auto t = root["topology"]) read_topology(r, t, cfg);
  if (auto v = root["victim"]) read_victim(r, v, cfg);
  if (auto c = root["client"]) read_client(r, c, cfg);
  if (auto a = root["attack"]) read_attack(r, a, cfg);
  if (!root["attack"] || !root["attack"]["server_port"])
    cfg.attack.server_port = *cfg.endpoint.listening_ports.begin();
  if (cfg.kind == ScenarioKind::PatchedControl && cfg.policy == victim::IpidPolicy::MixedDfBased &&
      !(root["victim"] && root["victim"]["policy"]))
    cfg.policy = victim::IpidPolicy::ProtocolFieldBased;
  if (!out.errors.empty()) return out;
  auto more = validate(cfg);
  out.errors.insert(out.errors.end(), more.begin(), more.end());
  if (out.errors.empty()) out.config = std::move(cfg);
  return out;
}

ConfigLoad load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ConfigLoad out;
    out.errors.push_back({"", fmt::format("cannot open '{}'", path)});
    return out;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace offpath::harness
