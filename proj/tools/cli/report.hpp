#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "siprop/inference.hpp"
#include "siprop/simulation.hpp"

namespace siprop::cli {

using Json = nlohmann::ordered_json;

/// Per-variable table: estimate, SI and naive intervals, significance flags.
void write_analysis_tsv(std::ostream& out, const AnalysisResult& result);
Json analysis_json(const AnalysisResult& result, double alpha);

struct NamedScenario {
  std::string name;
  ScenarioConfig config;
};

/// Accepts a single scenario object, an array of them, or {"scenarios": [...]}.
std::vector<NamedScenario> scenarios_from_json(const Json& doc);
NamedScenario scenario_from_json(const Json& obj);
Json scenario_to_json(const NamedScenario& s);
std::string default_scenario_name(const ScenarioConfig& cfg);

struct ScenarioMetrics {
  NamedScenario scenario;
  MetricsReport metrics;
};

/// One row per scenario and method.
void write_metrics_tsv(std::ostream& out, const std::vector<ScenarioMetrics>& runs);
Json metrics_json(const std::vector<ScenarioMetrics>& runs);

/// One JSON object per line, one line per replicate.
void write_records_jsonl(std::ostream& out, const std::string& scenario,
                         const std::vector<ReplicateRecord>& records);

void write_pivot_tsv(std::ostream& out, const PivotCheckResult& result);
Json pivot_json(const NamedScenario& scenario, const PivotCheckConfig& cfg, const PivotCheckResult& result);

/// 1% critical value of the one-sample KS distance, 1.628 / sqrt(n).
double ks_critical_1pct(Index n);

}  // namespace siprop::cli
