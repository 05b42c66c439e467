#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "offpath/harness/scenario.hpp"

namespace offpath::harness {

struct BatchSummary {
  std::uint64_t runs = 0;
  std::uint64_t successes = 0;
  double success_rate = 0.0;
  double mean_total_ms = 0.0;
  double p50_total_ms = 0.0;
  double p90_total_ms = 0.0;
  // Over successful runs only.
  double mean_success_total_ms = 0.0;
  std::map<std::string, double> mean_phase_ms;
  std::map<std::string, std::uint64_t> failures;
  double mean_collision_trials = 0.0;
  std::uint64_t collision_successes = 0;
};

BatchSummary summarize(const std::vector<RunResult>& runs);

nlohmann::json to_json(const RunResult& run);
nlohmann::json to_json(const BatchSummary& batch);
// Machine-readable summary of a batch: aggregate plus one entry per run.
nlohmann::json summary_document(const ScenarioConfig& cfg, const std::vector<RunResult>& runs,
                                const BatchSummary& batch);

// Human-readable table for the terminal.
std::string render_table(const std::vector<RunResult>& runs, const BatchSummary& batch);

}  // namespace offpath::harness
