#include "offpath/harness/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace offpath::harness {

namespace {

// Nearest-rank percentile of a sorted sample.
double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

std::string failed_phase(const attack::AttackReport& r) {
  for (const auto& p : r.phases)
    if (!p.success) return p.name;
  return {};
}

}  // namespace

BatchSummary summarize(const std::vector<RunResult>& runs) {
  BatchSummary s;
  s.runs = runs.size();
  std::vector<double> totals, success_totals, trials;
  std::map<std::string, std::vector<double>> phase_times;
  for (const auto& r : runs) {
    auto total = static_cast<double>(r.report.total_ms());
    totals.push_back(total);
    if (r.success()) {
      ++s.successes;
      success_totals.push_back(total);
    } else {
      ++s.failures[attack::to_string(r.report.failure())];
    }
    for (const auto& p : r.report.phases) phase_times[p.name].push_back(static_cast<double>(p.duration()));
    if (const auto* c = r.report.find("collision"); c && c->success) {
      ++s.collision_successes;
      if (auto it = c->counters.find("trials"); it != c->counters.end())
        trials.push_back(static_cast<double>(it->second));
    }
  }
  s.success_rate = s.runs ? static_cast<double>(s.successes) / static_cast<double>(s.runs) : 0.0;
  std::sort(totals.begin(), totals.end());
  s.mean_total_ms = mean(totals);
  s.p50_total_ms = percentile(totals, 0.5);
  s.p90_total_ms = percentile(totals, 0.9);
  s.mean_success_total_ms = mean(success_totals);
  for (const auto& [name, xs] : phase_times) s.mean_phase_ms[name] = mean(xs);
  s.mean_collision_trials = mean(trials);
  return s;
}

nlohmann::json to_json(const RunResult& run) {
  using nlohmann::json;
  json phases = json::array();
  for (const auto& p : run.report.phases) {
    json ph{{"name", p.name},
            {"start_ms", p.start_ms},
            {"end_ms", p.end_ms},
            {"duration_ms", p.duration()},
            {"packets_sent", p.packets_sent},
            {"success", p.success},
            {"reason", attack::to_string(p.reason)},
            {"inferred", p.inferred ? json(*p.inferred) : json(nullptr)},
            {"counters", p.counters}};
    phases.push_back(std::move(ph));
  }
  const auto& t = run.truth;
  json enumerated = json::array();
  for (auto a : run.enumerated) enumerated.push_back(a.to_string());
  return json{
      {"seed", run.seed},
      {"kind", to_string(run.kind)},
      {"success", run.success()},
      {"failure", attack::to_string(run.report.failure())},
      {"failed_phase", failed_phase(run.report)},
      {"total_ms", run.report.total_ms()},
      {"end_ms", run.end_ms},
      {"phases", std::move(phases)},
      {"packets", {{"attacker", run.packets_attacker},
                   {"server", run.packets_server},
                   {"client", run.packets_client},
                   {"lost", run.packets_lost}}},
      {"events", run.events},
      {"enumerated", std::move(enumerated)},
      {"truth", {{"connection_established", t.connection_established},
                 {"connection_alive", t.connection_alive},
                 {"client_port", t.client_port},
                 {"rcv_nxt", t.rcv_nxt},
                 {"rcv_wnd", t.rcv_wnd},
                 {"snd_una", t.snd_una},
                 {"snd_nxt", t.snd_nxt},
                 {"snd_max_wnd", t.snd_max_wnd},
                 {"df_cleared", t.df_cleared},
                 {"app_received", t.app_received},
                 {"server_tcp_hash_draws", t.server_tcp_hash_draws},
                 {"server_challenge_acks", t.server_challenge_acks},
                 {"server_duplicate_acks", t.server_duplicate_acks},
                 {"attacker_foreign_packets", t.attacker_foreign_packets},
                 {"attacker_peak_rate", t.attacker_peak_rate}}},
  };
}

nlohmann::json to_json(const BatchSummary& b) {
  return nlohmann::json{{"runs", b.runs},
                        {"successes", b.successes},
                        {"success_rate", b.success_rate},
                        {"mean_total_ms", b.mean_total_ms},
                        {"p50_total_ms", b.p50_total_ms},
                        {"p90_total_ms", b.p90_total_ms},
                        {"mean_success_total_ms", b.mean_success_total_ms},
                        {"mean_phase_ms", b.mean_phase_ms},
                        {"failures", b.failures},
                        {"mean_collision_trials", b.mean_collision_trials},
                        {"collision_successes", b.collision_successes}};
}

nlohmann::json summary_document(const ScenarioConfig& cfg, const std::vector<RunResult>& runs,
                                const BatchSummary& batch) {
  nlohmann::json results = nlohmann::json::array();
  for (const auto& r : runs) results.push_back(to_json(r));
  return nlohmann::json{{"kind", to_string(cfg.kind)},
                        {"seed", cfg.seed},
                        {"policy", victim::to_string(cfg.policy)},
                        {"aggregate", to_json(batch)},
                        {"runs", std::move(results)}};
}

std::string render_table(const std::vector<RunResult>& runs, const BatchSummary& batch) {
  std::string out = fmt::format("{:>5} {:>20} {:>8} {:<16} {:>12} {:>10}\n", "run", "seed", "outcome",
                                "failed", "virtual_s", "packets");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    out += fmt::format("{:>5} {:>20} {:>8} {:<16} {:>12.3f} {:>10}\n", i, r.seed,
                       r.success() ? "success" : "failure",
                       r.success() ? "-" : failed_phase(r.report) + ":" + attack::to_string(r.report.failure()),
                       static_cast<double>(r.report.total_ms()) / 1000.0, r.packets_attacker);
  }
  out += fmt::format("\nsuccess {}/{} ({:.1f}%)  mean {:.1f} s  p50 {:.1f} s  p90 {:.1f} s\n", batch.successes,
                     batch.runs, 100.0 * batch.success_rate, batch.mean_total_ms / 1000.0,
                     batch.p50_total_ms / 1000.0, batch.p90_total_ms / 1000.0);
  if (!batch.mean_phase_ms.empty()) {
    out += "mean phase time (s):";
    for (const auto& name : phase_names())
      if (auto it = batch.mean_phase_ms.find(name); it != batch.mean_phase_ms.end())
        out += fmt::format(" {}={:.1f}", name, it->second / 1000.0);
    out += "\n";
  }
  if (batch.collision_successes > 0)
    out += fmt::format("mean collision trials: {:.1f}\n", batch.mean_collision_trials);
  return out;
}

}  // namespace offpath::harness
