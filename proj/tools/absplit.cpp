// Command-line front end. Talks to the library only through its C API.
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "absplit/absplit.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

const char* kFormats = R"(File formats (version 1, CSV with header, money in integer minor units):
  users            user_id
  ads              ad_id,budget_minor[,alpha][,feat_<name>...]
  user assignment  user_id,submarket
  ads assignment   ad_id,copy,submarket,budget_minor,parent_budget_minor,rand_b_minor[,feat_<name>...]
  estimation data  ad_id,copy,submarket,budget_minor,rand_b_minor,outcome,treatment[,feat_<name>...]
  latent sidecar   ad_id,quality_score,quality_multiplier
  truth sidecar    ad_id,quality_multiplier,slope_control,slope_treatment
  interactions     JSON lines {"user_id","ad_id","kind","ts"}
  results          JSON lines, one record per fitted segment

Exit codes: 0 success, 1 data or statistical failure, 2 usage error.
Environment: ABSPLIT_SEED overrides the default seed, ABSPLIT_OUT_DIR the default output directory.)";

// Thrown for failures already reported on stderr.
struct Exit {
  int code;
};

int exit_code_for(absplit_status s) {
  switch (s) {
    case ABSPLIT_OK: return kExitOk;
    case ABSPLIT_ERR_INVALID_ARGUMENT:
    case ABSPLIT_ERR_IO: return kExitUsage;
    default: return kExitFailure;
  }
}

void check(absplit_status s) {
  if (s == ABSPLIT_OK) return;
  std::cerr << "error: " << absplit_last_error() << " (" << absplit_status_string(s) << ")\n";
  throw Exit{exit_code_for(s)};
}

[[noreturn]] void usage_error(const std::string& what) {
  std::cerr << "error: " << what << "\n";
  throw Exit{kExitUsage};
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("ABSPLIT_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      usage_error(std::string("ABSPLIT_SEED is not an unsigned integer: ") + env);
    }
  }
  return 0;
}

std::string default_out_dir() {
  const char* env = std::getenv("ABSPLIT_OUT_DIR");
  return env ? env : ".";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) usage_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) usage_error("cannot write " + path);
  out << text;
}

class Report {
 public:
  Report() = default;
  Report(const Report&) = delete;
  Report& operator=(const Report&) = delete;
  ~Report() { absplit_report_free(r_); }
  absplit_report** out() { return &r_; }
  std::string json() const { return absplit_report_json(r_); }
  std::string table() const { return absplit_report_table(r_); }
  std::string csv() const { return absplit_report_csv(r_); }
  bool passed() const { return absplit_report_passed(r_) != 0; }

 private:
  absplit_report* r_ = nullptr;
};

struct SplitHandle {
  absplit_split_config* p = nullptr;
  SplitHandle(double alpha, std::uint64_t seed, bool symmetric = false) {
    check(absplit_split_config_new(alpha, seed, &p));
    if (symmetric) check(absplit_split_config_set_symmetric(p, 1));
  }
  SplitHandle(const SplitHandle&) = delete;
  ~SplitHandle() { absplit_split_config_free(p); }
};

struct SimHandle {
  absplit_sim_config* p = nullptr;
  explicit SimHandle(const std::string& json) { check(absplit_sim_config_from_json(json.c_str(), &p)); }
  SimHandle(const SimHandle&) = delete;
  ~SimHandle() { absplit_sim_config_free(p); }
};

struct DatasetHandle {
  absplit_dataset* p = nullptr;
  DatasetHandle() = default;
  DatasetHandle(const DatasetHandle&) = delete;
  ~DatasetHandle() { absplit_dataset_free(p); }
};

struct OutputFlags {
  bool json = false;
  void add(CLI::App* cmd) { cmd->add_flag("--json", json, "Print JSON lines instead of a table"); }
  void print(const Report& r) const { std::cout << (json ? r.json() : r.table()); }
};

// Simulation settings: a JSON file plus command-line overrides.
struct SimFlags {
  std::string config_path;
  std::optional<std::int64_t> n_ads, n_users, budget_fixed;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> response, noise, outcome;
  std::optional<double> slope, base, scale, exponent, treatment_slope, treatment_exponent, confounding, quality_sigma,
      log_mean, log_sigma;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Simulation config (JSON object)");
    cmd->add_option("--n-ads", n_ads, "Number of ads")->check(CLI::PositiveNumber);
    cmd->add_option("--n-users", n_users, "Number of users")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "Simulation seed (default ABSPLIT_SEED or 0)");
    cmd->add_option("--response", response, "linear | concave_power | saturating | auction_micro");
    cmd->add_option("--noise", noise, "none | poisson | gaussian");
    cmd->add_option("--outcome", outcome, "Outcome kind: impression | click | conversion");
    cmd->add_option("--slope", slope, "Linear slope, outcomes per minor unit");
    cmd->add_option("--base", base, "Linear intercept");
    cmd->add_option("--scale", scale, "Concave power scale");
    cmd->add_option("--exponent", exponent, "Concave power exponent");
    cmd->add_option("--treatment-slope", treatment_slope, "Linear slope in M2 (defaults to --slope)");
    cmd->add_option("--treatment-exponent", treatment_exponent, "Concave exponent in M2");
    cmd->add_option("--confounding", confounding, "Correlation of budget with latent quality");
    cmd->add_option("--quality-sigma", quality_sigma, "Dispersion of latent quality");
    cmd->add_option("--budget-log-mean", log_mean, "Lognormal budget location (log minor units)");
    cmd->add_option("--budget-log-sigma", log_sigma, "Lognormal budget scale");
    cmd->add_option("--budget-fixed", budget_fixed, "Give every ad this budget (minor units)");
  }

  std::string json() const {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      try {
        j = nlohmann::json::parse(read_file(config_path));
      } catch (const nlohmann::json::exception& e) {
        usage_error(config_path + ": " + e.what());
      }
    }
    if (!j.contains("seed") || seed) j["seed"] = seed.value_or(default_seed());
    if (n_ads) j["n_ads"] = *n_ads;
    if (n_users) j["n_users"] = *n_users;
    if (outcome) j["outcome_kind"] = *outcome;
    if (confounding) j["confounding_strength"] = *confounding;
    if (quality_sigma) j["quality_sigma"] = *quality_sigma;
    auto& r = j["response"];
    if (r.is_null()) r = nlohmann::json::object();
    if (response) r["form"] = *response;
    if (noise) r["noise"] = *noise;
    if (slope) r["slope"] = *slope;
    if (base) r["base"] = *base;
    if (scale) r["scale"] = *scale;
    if (exponent) r["exponent"] = *exponent;
    if (treatment_slope || treatment_exponent) {
      auto t = j.contains("treatment") && !j["treatment"].is_null() ? j["treatment"] : r;
      if (treatment_slope) t["slope"] = *treatment_slope;
      if (treatment_exponent) t["exponent"] = *treatment_exponent;
      j["treatment"] = t;
    }
    if (budget_fixed) {
      j["budget"] = {{"kind", "fixed"}, {"fixed_minor", *budget_fixed}};
    } else if (log_mean || log_sigma) {
      auto& b = j["budget"];
      if (b.is_null()) b = {{"kind", "lognormal"}};
      if (log_mean) b["log_mean"] = *log_mean;
      if (log_sigma) b["log_sigma"] = *log_sigma;
    }
    return j.dump();
  }
};

struct SpecFlags {
  bool fe = false;
  bool no_weights = false;
  bool naive = false;
  std::vector<std::string> controls;
  std::string segment_by;
  double level = 0.95;

  void add(CLI::App* cmd, bool with_naive) {
    cmd->add_flag("--fe", fe, "Ad fixed effects (per-ad pair differencing)");
    cmd->add_flag("--no-weights", no_weights, "Unweighted fit instead of weights 1/RandB^2");
    cmd->add_option("--controls", controls, "Categorical control features (one-hot)")->delimiter(',');
    cmd->add_option("--segment-by", segment_by, "Fit separately for each level of this feature");
    cmd->add_option("--level", level, "Confidence level")->check(CLI::Range(0.0, 1.0));
    if (with_naive) cmd->add_flag("--naive", naive, "Also report the observational total-budget slope");
  }

  std::string json() const {
    nlohmann::json j{{"fixed_effects", fe}, {"weights", !no_weights}, {"controls", controls},
                     {"confidence_level", level}, {"naive", naive}};
    if (!segment_by.empty()) j["segment_by"] = segment_by;
    return j.dump();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymmetric budget split experiments: assignment, simulation, estimation and diagnostics"};
  app.footer(kFormats);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(absplit_version()) + " (format version " +
                                         std::to_string(absplit_format_version()) + ")");

  // split
  auto* split = app.add_subcommand("split", "Assign users to sub-markets and split ad budgets");
  std::string users_path, ads_path, out_dir;
  double alpha = 0.6;
  std::optional<std::uint64_t> split_seed;
  bool symmetric = false;
  split->add_option("--users", users_path, "Users file")->required();
  split->add_option("--ads", ads_path, "Ads file")->required();
  split->add_option("--out", out_dir, "Output directory (default ABSPLIT_OUT_DIR or .)");
  split->add_option("--alpha", alpha, "High-copy budget share, in (0.5, 1)");
  split->add_option("--seed", split_seed, "Assignment seed (default ABSPLIT_SEED or 0)");
  split->add_flag("--symmetric", symmetric, "Allow alpha = 0.5 (marketplace A/B mode)");
  OutputFlags split_out;
  split_out.add(split);

  // generate
  auto* generate = app.add_subcommand("generate", "Generate a synthetic population of users and ads");
  SimFlags gen_sim;
  gen_sim.add(generate);
  std::string gen_out;
  generate->add_option("--out", gen_out, "Output directory (default ABSPLIT_OUT_DIR or .)");
  OutputFlags gen_print;
  gen_print.add(generate);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Simulate interactions for assigned ad copies");
  SimFlags sim_flags;
  sim_flags.add(simulate);
  std::string sim_users, sim_ads, sim_latent, sim_interactions, sim_truth;
  simulate->add_option("--user-assignment", sim_users, "User assignment file")->required();
  simulate->add_option("--ads-assignment", sim_ads, "Ads assignment file")->required();
  simulate->add_option("--latent", sim_latent, "Latent quality sidecar");
  simulate->add_option("--interactions", sim_interactions, "Output interactions file (JSON lines)")->required();
  simulate->add_option("--truth", sim_truth, "Output ground-truth slopes (closed-form responses)");
  OutputFlags sim_print;
  sim_print.add(simulate);

  // build
  auto* build = app.add_subcommand("build", "Aggregate interactions into the estimation dataset");
  std::string build_users, build_ads, build_interactions, build_out, build_kind = "conversion";
  bool lenient = false;
  build->add_option("--user-assignment", build_users, "User assignment file")->required();
  build->add_option("--ads-assignment", build_ads, "Ads assignment file")->required();
  build->add_option("--interactions", build_interactions, "Interactions file")->required();
  build->add_option("--out", build_out, "Output estimation file")->required();
  build->add_option("--outcome", build_kind, "Outcome kind: impression | click | conversion");
  build->add_flag("--lenient", lenient, "Drop and count orphan interactions instead of failing");
  OutputFlags build_print;
  build_print.add(build);

  // estimate / lift
  auto* estimate = app.add_subcommand("estimate", "Estimate incrementality (budget slope)");
  std::string est_data, est_out;
  SpecFlags est_spec;
  estimate->add_option("--data", est_data, "Estimation dataset")->required();
  estimate->add_option("--out", est_out, "Write result records (JSON lines) to this file");
  est_spec.add(estimate, true);
  OutputFlags est_print;
  est_print.add(estimate);

  auto* lift = app.add_subcommand("lift", "Estimate the incrementality lift of the M2 mechanism");
  std::string lift_data, lift_out;
  SpecFlags lift_spec;
  lift->add_option("--data", lift_data, "Estimation dataset")->required();
  lift->add_option("--out", lift_out, "Write result records (JSON lines) to this file");
  lift_spec.add(lift, false);
  OutputFlags lift_print;
  lift_print.add(lift);

  // balance
  auto* balance = app.add_subcommand("balance", "Check budget balance across sub-markets");
  std::string bal_ads, bal_segment;
  double bal_significance = 0.05;
  balance->add_option("--ads-assignment", bal_ads, "Ads assignment file")->required();
  balance->add_option("--significance", bal_significance, "Significance level")->check(CLI::Range(0.0, 1.0));
  balance->add_option("--segment-by", bal_segment, "Also report per level of this feature");
  OutputFlags bal_print;
  bal_print.add(balance);

  // power
  auto* power = app.add_subcommand("power", "Monte-Carlo power analysis over alpha");
  SimFlags pow_sim;
  pow_sim.add(power);
  std::vector<double> pow_alphas{0.55, 0.6, 0.7, 0.8, 0.9};
  std::int64_t pow_reps = 200;
  unsigned pow_threads = 1;
  std::string pow_csv;
  bool pow_pooled = false;
  power->add_option("--alphas", pow_alphas, "Alpha grid")->delimiter(',');
  power->add_option("--replications", pow_reps, "Replications per alpha (>= 50)");
  power->add_option("--threads", pow_threads, "Worker threads (0 = all cores)");
  power->add_option("--csv", pow_csv, "Write the power curve as CSV");
  power->add_flag("--pooled", pow_pooled, "Estimate without ad fixed effects");
  OutputFlags pow_print;
  pow_print.add(power);

  // sidefx
  auto* sidefx = app.add_subcommand("sidefx", "Ad-level A/B test of asymmetric versus symmetric splitting");
  SimFlags fx_sim;
  fx_sim.add(sidefx);
  double fx_alpha1 = 0.6, fx_significance = 0.05;
  std::string fx_ads, fx_users, fx_latent;
  sidefx->add_option("--alpha1", fx_alpha1, "Asymmetric arm alpha, in (0.5, 1)");
  sidefx->add_option("--significance", fx_significance, "Significance level")->check(CLI::Range(0.0, 1.0));
  sidefx->add_option("--ads", fx_ads, "Ads file (default: generate from the simulation config)");
  sidefx->add_option("--users", fx_users, "Users file (auction form)");
  sidefx->add_option("--latent", fx_latent, "Latent quality sidecar");
  OutputFlags fx_print;
  fx_print.add(sidefx);

  // forecast
  auto* forecast = app.add_subcommand("forecast", "Forecast outcomes at new budget levels");
  std::string fc_result, fc_segment, fc_data, fc_ad, fc_csv;
  std::optional<std::int64_t> fc_budget;
  std::optional<double> fc_outcome;
  std::vector<std::int64_t> fc_levels;
  forecast->add_option("--result", fc_result, "Result file from estimate")->required();
  forecast->add_option("--segment", fc_segment, "Segment record to use (default: pooled)");
  forecast->add_option("--baseline-budget", fc_budget, "Reference budget (minor units)");
  forecast->add_option("--baseline-outcome", fc_outcome, "Expected outcome at the reference budget");
  forecast->add_option("--data", fc_data, "Estimation dataset (baseline from --ad)");
  forecast->add_option("--ad", fc_ad, "Ad whose high copy is the baseline");
  forecast->add_option("--levels", fc_levels, "Budget levels (minor units)")->delimiter(',')->required();
  forecast->add_option("--csv", fc_csv, "Write the forecast as CSV");
  OutputFlags fc_print;
  fc_print.add(forecast);

  // pipeline run-all
  auto* pipeline = app.add_subcommand("pipeline", "End-to-end runs");
  pipeline->require_subcommand(1);
  auto* run_all = pipeline->add_subcommand("run-all", "generate -> split -> simulate -> build -> estimate");
  SimFlags ra_sim;
  ra_sim.add(run_all);
  double ra_alpha = 0.6;
  std::string ra_out;
  SpecFlags ra_spec;
  run_all->add_option("--alpha", ra_alpha, "High-copy budget share, in (0.5, 1)");
  run_all->add_option("--out", ra_out, "Output directory (default ABSPLIT_OUT_DIR or .)");
  ra_spec.add(run_all, true);
  OutputFlags ra_print;
  ra_print.add(run_all);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (split->parsed()) {
      SplitHandle cfg(alpha, split_seed.value_or(default_seed()), symmetric);
      Report r;
      const std::string dir = out_dir.empty() ? default_out_dir() : out_dir;
      check(absplit_split_files(cfg.p, users_path.c_str(), ads_path.c_str(), dir.c_str(), r.out()));
      split_out.print(r);
    } else if (generate->parsed()) {
      SimHandle sim(gen_sim.json());
      Report r;
      const std::string dir = gen_out.empty() ? default_out_dir() : gen_out;
      check(absplit_generate(sim.p, dir.c_str(), r.out()));
      gen_print.print(r);
    } else if (simulate->parsed()) {
      SimHandle sim(sim_flags.json());
      Report r;
      check(absplit_simulate_files(sim.p, sim_users.c_str(), sim_ads.c_str(),
                                   sim_latent.empty() ? nullptr : sim_latent.c_str(), sim_interactions.c_str(),
                                   sim_truth.empty() ? nullptr : sim_truth.c_str(), r.out()));
      sim_print.print(r);
    } else if (build->parsed()) {
      DatasetHandle ds;
      Report r;
      check(absplit_dataset_build(build_users.c_str(), build_ads.c_str(), build_interactions.c_str(),
                                  build_kind.c_str(), lenient ? 1 : 0, &ds.p, r.out()));
      check(absplit_dataset_save(ds.p, build_out.c_str()));
      build_print.print(r);
    } else if (estimate->parsed() || lift->parsed()) {
      const bool is_lift = lift->parsed();
      const auto& spec = is_lift ? lift_spec : est_spec;
      DatasetHandle ds;
      check(absplit_dataset_load((is_lift ? lift_data : est_data).c_str(), &ds.p));
      Report r;
      const std::string spec_json = spec.json();
      check(is_lift ? absplit_estimate_lift(ds.p, spec_json.c_str(), r.out())
                    : absplit_estimate(ds.p, spec_json.c_str(), r.out()));
      const auto& out = is_lift ? lift_out : est_out;
      if (!out.empty()) write_file(out, r.json());
      (is_lift ? lift_print : est_print).print(r);
    } else if (balance->parsed()) {
      Report r;
      check(absplit_balance(bal_ads.c_str(), bal_significance, bal_segment.empty() ? nullptr : bal_segment.c_str(),
                            r.out()));
      bal_print.print(r);
      if (!r.passed()) return kExitFailure;
    } else if (power->parsed()) {
      SimHandle sim(pow_sim.json());
      nlohmann::json options{{"alphas", pow_alphas},
                             {"replications", pow_reps},
                             {"threads", pow_threads},
                             {"fixed_effects", !pow_pooled}};
      Report r;
      check(absplit_power(sim.p, options.dump().c_str(), r.out()));
      if (!pow_csv.empty()) write_file(pow_csv, r.csv());
      pow_print.print(r);
    } else if (sidefx->parsed()) {
      SimHandle sim(fx_sim.json());
      // Only the seed and namespaces of this config matter; arm alphas are explicit.
      SplitHandle cfg(0.6, fx_sim.seed.value_or(default_seed()));
      Report r;
      check(absplit_side_effect(sim.p, cfg.p, fx_alpha1, fx_significance,
                                fx_users.empty() ? nullptr : fx_users.c_str(),
                                fx_ads.empty() ? nullptr : fx_ads.c_str(),
                                fx_latent.empty() ? nullptr : fx_latent.c_str(), r.out()));
      fx_print.print(r);
    } else if (forecast->parsed()) {
      std::string record;
      {
        std::istringstream lines(read_file(fc_result));
        std::string line;
        while (std::getline(lines, line)) {
          if (line.empty()) continue;
          nlohmann::json j;
          try {
            j = nlohmann::json::parse(line);
          } catch (const nlohmann::json::exception& e) {
            std::cerr << "error: " << fc_result << ": " << e.what() << "\n";
            return kExitFailure;
          }
          if (j.value("type", "") == "incrementality" && j.value("segment", "") == fc_segment) {
            record = line;
            break;
          }
        }
      }
      if (record.empty()) {
        std::cerr << "error: no incrementality record" << (fc_segment.empty() ? "" : " for segment " + fc_segment)
                  << " in " << fc_result << "\n";
        return kExitFailure;
      }
      Report r;
      if (!fc_ad.empty()) {
        if (fc_data.empty()) usage_error("--ad needs --data");
        DatasetHandle ds;
        check(absplit_dataset_load(fc_data.c_str(), &ds.p));
        check(absplit_forecast_for_ad(record.c_str(), ds.p, fc_ad.c_str(), fc_levels.data(), fc_levels.size(),
                                      r.out()));
      } else {
        if (!fc_budget || !fc_outcome) usage_error("give --baseline-budget and --baseline-outcome, or --data and --ad");
        check(absplit_forecast(record.c_str(), *fc_budget, *fc_outcome, fc_levels.data(), fc_levels.size(),
                               r.out()));
      }
      if (!fc_csv.empty()) write_file(fc_csv, r.csv());
      fc_print.print(r);
    } else if (run_all->parsed()) {
      SimHandle sim(ra_sim.json());
      SplitHandle cfg(ra_alpha, ra_sim.seed.value_or(default_seed()));
      Report r;
      const std::string dir = ra_out.empty() ? default_out_dir() : ra_out;
      check(absplit_run_all(sim.p, cfg.p, ra_spec.json().c_str(), dir.c_str(), r.out()));
      ra_print.print(r);
    }
  } catch (const Exit& e) {
    return e.code;
  }
  return kExitOk;
}
