#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "offpath/attack/attacker.hpp"
#include "offpath/net/address.hpp"
#include "offpath/net/simulator.hpp"
#include "offpath/victim/host.hpp"

namespace offpath::harness {

enum class ScenarioKind { DowngradeOnly, CollisionScan, PortDetect, FullReset, FullInject, PatchedControl };

const char* to_string(ScenarioKind kind);
std::optional<ScenarioKind> parse_kind(std::string_view name);

enum class CollisionStrategy { Pool, Enumerate };

// Latency is either fixed or drawn uniformly per run.
struct LatencySpec {
  net::SimTime min_ms = 10;
  net::SimTime max_ms = 10;
};

struct LinkSpec {
  LatencySpec latency;
  double loss_rate = 0.0;
  bool spoofing_permitted = false;
};

struct NoiseSpec {
  int rate_pps = 0;
  std::size_t addresses = 16;
  net::Ipv4Addr base{198, 18, 0, 1};
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::FullReset;
  std::uint64_t seed = 1;

  net::Ipv4Addr server{10, 0, 0, 1};
  net::Ipv4Addr client{10, 1, 0, 2};
  net::Ipv4Addr attacker{10, 2, 0, 1};
  net::Ipv4Prefix pool_prefix{net::Ipv4Addr{100, 64, 0, 0}, 10};
  std::size_t pool_size = 8192;
  LinkSpec client_server{{10, 10}, 0.0, false};
  LinkSpec attacker_server{{10, 10}, 0.0, true};
  LinkSpec attacker_client{{10, 10}, 0.0, true};
  NoiseSpec noise;

  victim::IpidPolicy policy = victim::IpidPolicy::MixedDfBased;
  int ipid_tick_ms = 4;
  victim::PmtudConfig pmtud;
  victim::EndpointConfig endpoint;
  net::SimTime destination_counter_idle_ms = 60'000;

  bool client_connects = true;
  bool client_rst_on_unexpected_synack = true;
  net::SimTime client_send_interval_ms = 0;
  std::string banner = "SSH-2.0-OpenSSH_8.2\r\n";
  std::string request = "SSH-2.0-client\r\n";

  net::SimTime attack_start_ms = 2000;
  CollisionStrategy collision_strategy = CollisionStrategy::Pool;
  net::Ipv4Addr enumerate_first{10, 1, 0, 0};
  std::uint64_t enumerate_count = 2048;
  net::SimTime enumerate_time_limit_ms = 3'600'000;
  // Template for the attacker; addresses are filled in per run.
  attack::AttackConfig attack;
};

struct ConfigError {
  std::string path;
  std::string message;
};

struct ConfigLoad {
  std::optional<ScenarioConfig> config;
  std::vector<ConfigError> errors;
};

ConfigLoad parse_config(const std::string& text);
ConfigLoad load_config_file(const std::string& path);

// Cross-field checks; returns every violated constraint.
std::vector<ConfigError> validate(const ScenarioConfig& cfg);

}  // namespace offpath::harness
