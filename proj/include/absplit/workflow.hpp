#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "absplit/diagnostics.hpp"
#include "absplit/estimator.hpp"
#include "absplit/marketsim.hpp"
#include "absplit/pipeline.hpp"

// File-level orchestration shared by the C API and the command-line tool.
namespace absplit::workflow {

// File names used inside an output directory.
inline constexpr const char* kUsersFile = "users.csv";
inline constexpr const char* kAdsFile = "ads.csv";
inline constexpr const char* kLatentFile = "latent.csv";
inline constexpr const char* kUserAssignmentFile = "user_assignment.csv";
inline constexpr const char* kAdsAssignmentFile = "ads_assignment.csv";
inline constexpr const char* kInteractionsFile = "interactions.jsonl";
inline constexpr const char* kTruthFile = "truth.csv";
inline constexpr const char* kEstimationFile = "estimation.csv";
inline constexpr const char* kResultsFile = "results.jsonl";

// Output of every operation: JSON lines, a human table, optional CSV.
struct Report {
  std::string json;
  std::string table;
  std::string csv;
  bool passed = true;
};

// Unknown keys are rejected so that typos do not silently fall back to
// defaults.
SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SimConfig& config);

struct EstimateOptions {
  RegressionSpec spec;
  std::optional<std::string> segment_by;
  bool naive = false;  // also report the observational budget slope
};
EstimateOptions estimate_options_from_json(const nlohmann::json& j);
PowerOptions power_options_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const IncrementalityEstimate& e, std::string_view type = "incrementality");
nlohmann::ordered_json to_json(const LiftEstimate& e);
nlohmann::ordered_json to_json(const BalanceReport& r);
nlohmann::ordered_json to_json(const PowerCurve& c);
nlohmann::ordered_json to_json(const SideEffectReport& r);
nlohmann::ordered_json to_json(const BuildStats& s);

// Reads an incrementality record written by `to_json`.
IncrementalityEstimate incrementality_from_json(const nlohmann::json& j);
// First incrementality record of a results file (optionally of one segment).
IncrementalityEstimate read_incrementality_result(const std::string& path, const std::string& segment = "");

Report split_files(const std::string& users_path, const std::string& ads_path, const std::string& out_dir,
                   const SplitConfig& config);
Report generate_files(const SimConfig& config, const std::string& out_dir);

struct SimulatePaths {
  std::string user_assignment;
  std::string ads_assignment;
  std::string latent;        // optional
  std::string interactions;  // output
  std::string truth;         // optional output, closed-form forms only
};
Report simulate_files(const SimConfig& config, const SimulatePaths& paths);

Report build_report(const BuildResult& result, const std::string& output_path);
Report estimate_report(const std::vector<EstimationRow>& rows, const EstimateOptions& options);
Report lift_report(const std::vector<EstimationRow>& rows, const EstimateOptions& options);
Report balance_report(const std::vector<AdCopy>& copies, double significance,
                      const std::optional<std::string>& segment_feature);
Report power_report(const SimConfig& config, const PowerOptions& options);
Report side_effect_report(const Population& population, double alpha1, const SplitConfig& split,
                          const SimConfig& config, double significance = 0.05);
Report forecast_report(const IncrementalityEstimate& estimate, const ForecastBaseline& baseline,
                       const std::vector<std::int64_t>& levels);

// generate -> split -> simulate -> build -> estimate, every stage through its
// file format, all inside `out_dir`.
Report run_all(const SimConfig& sim, const SplitConfig& split, const EstimateOptions& options,
               const std::string& out_dir);

std::string join_path(const std::string& dir, const std::string& name);

}  // namespace absplit::workflow
