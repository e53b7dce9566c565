#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace polyscal {

/// A request to run one registered experiment pipeline. `mesh` optionally
/// replaces the pipeline's built-in input complex by a mesh document on
/// disk; `overrides` adjusts sampling budgets ("samples", "level",
/// "subdivision_level", "steps") — unknown keys are rejected. The seed feeds
/// every sampled stage and is echoed in the report. When `report_dir` is
/// nonempty the report document is written there as
/// `<name>-seed<seed>.json`.
struct ExperimentSpec {
  std::string name;
  std::string mesh;
  nlohmann::json overrides = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string report_dir = "reports";
};

/// One checked claim: a measured value against an expected value within a
/// tolerance (tolerance 0 marks qualitative claims where `measured` and
/// `expected` encode pass/fail as 1/0). `provenance` states where the
/// expected value comes from.
struct AssertionRecord {
  std::string claim;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string provenance;
};

struct ExperimentReport {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<AssertionRecord> assertions;
  bool pass = false;  // conjunction of the assertion verdicts
  std::string environment;
  double runtime_seconds = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

struct ExperimentInfo {
  std::string name;
  std::string summary;
};

/// Registered pipelines, in a fixed documented order.
std::vector<ExperimentInfo> list_experiments();

/// Runs one registered pipeline. Throws std::invalid_argument for unknown
/// experiment names or override keys and propagates input loading errors;
/// stages that come back inconclusive fail their assertion with a
/// diagnostic rather than throwing.
ExperimentReport run_experiment(const ExperimentSpec& spec);

nlohmann::json report_to_json(const ExperimentReport& report);

/// Writes `report_to_json` under `dir` (created if missing); returns the
/// file path.
std::string write_report(const ExperimentReport& report, const std::string& dir);

}  // namespace polyscal
