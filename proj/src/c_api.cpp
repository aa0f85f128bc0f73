#include "absplit/absplit.h"

#include <exception>
#include <string>
#include <utility>
#include <vector>

#include "absplit/assigner.hpp"
#include "absplit/pipeline.hpp"
#include "absplit/workflow.hpp"

struct absplit_split_config {
  absplit::SplitConfig config;
};

struct absplit_sim_config {
  absplit::SimConfig config;
};

struct absplit_dataset {
  std::vector<absplit::EstimationRow> rows;
};

struct absplit_report {
  absplit::workflow::Report report;
};

namespace {

thread_local std::string last_error;

absplit_status status_of(absplit::ErrorCode code) {
  switch (code) {
    case absplit::ErrorCode::InvalidArgument: return ABSPLIT_ERR_INVALID_ARGUMENT;
    case absplit::ErrorCode::Io: return ABSPLIT_ERR_IO;
    case absplit::ErrorCode::Parse: return ABSPLIT_ERR_PARSE;
    case absplit::ErrorCode::Data: return ABSPLIT_ERR_DATA;
    case absplit::ErrorCode::Estimation: return ABSPLIT_ERR_ESTIMATION;
  }
  return ABSPLIT_ERR_INTERNAL;
}

template <typename Fn>
absplit_status guard(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return ABSPLIT_OK;
  } catch (const absplit::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const nlohmann::json::exception& e) {
    last_error = std::string("invalid JSON: ") + e.what();
    return ABSPLIT_ERR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    last_error = e.what();
    return ABSPLIT_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return ABSPLIT_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (!p) absplit::fail(absplit::ErrorCode::InvalidArgument, std::string(name) + " must not be NULL");
}

std::string opt(const char* s) { return s ? std::string(s) : std::string(); }

nlohmann::json parse_object(const char* text) {
  if (!text || !*text) return nlohmann::json::object();
  return nlohmann::json::parse(text);
}

void emit(absplit::workflow::Report report, absplit_report** out) {
  if (out) *out = new absplit_report{std::move(report)};
}

std::vector<std::int64_t> levels_of(const int64_t* levels, size_t n) {
  if (n > 0) require(levels, "levels");
  return std::vector<std::int64_t>(levels, levels + n);
}

absplit::IncrementalityEstimate result_of(const char* result_json) {
  require(result_json, "result_json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(result_json);
  } catch (const nlohmann::json::exception& e) {
    absplit::fail(absplit::ErrorCode::Parse, std::string("result record: ") + e.what());
  }
  return absplit::workflow::incrementality_from_json(j);
}

}  // namespace

extern "C" {

const char* absplit_version(void) { return "1.0.0"; }

int absplit_format_version(void) { return absplit::kFormatVersion; }

const char* absplit_status_string(absplit_status status) {
  switch (status) {
    case ABSPLIT_OK: return "ok";
    case ABSPLIT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case ABSPLIT_ERR_IO: return "i/o error";
    case ABSPLIT_ERR_PARSE: return "parse error";
    case ABSPLIT_ERR_DATA: return "data error";
    case ABSPLIT_ERR_ESTIMATION: return "estimation error";
    case ABSPLIT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* absplit_last_error(void) { return last_error.c_str(); }

absplit_status absplit_split_config_new(double alpha, uint64_t seed, absplit_split_config** out) {
  return guard([&] {
    require(out, "out");
    absplit::SplitConfig c;
    c.alpha = alpha;
    c.seed = seed;
    // 0.5 is accepted here and checked again once symmetric mode is known.
    if (!(alpha >= 0.5 && alpha < 1.0))
      absplit::fail(absplit::ErrorCode::InvalidArgument, "alpha must lie in [0.5, 1)");
    *out = new absplit_split_config{c};
  });
}

absplit_status absplit_split_config_set_symmetric(absplit_split_config* config, int allow) {
  return guard([&] {
    require(config, "config");
    config->config.allow_symmetric = allow != 0;
  });
}

absplit_status absplit_split_config_set_namespaces(absplit_split_config* config, const char* user, const char* copy,
                                                   const char* side_effect) {
  return guard([&] {
    require(config, "config");
    auto& ns = config->config.namespaces;
    if (user) ns.user = user;
    if (copy) ns.copy = copy;
    if (side_effect) ns.side_effect = side_effect;
  });
}

void absplit_split_config_free(absplit_split_config* config) { delete config; }

absplit_status absplit_assign_user(const absplit_split_config* config, const char* user_id, int* submarket) {
  return guard([&] {
    require(config, "config");
    require(user_id, "user_id");
    require(submarket, "submarket");
    *submarket = absplit::assign_user(user_id, config->config) == absplit::SubMarket::M1 ? ABSPLIT_M1 : ABSPLIT_M2;
  });
}

absplit_status absplit_allocate_copies(const absplit_split_config* config, const char* ad_id, int* allocation) {
  return guard([&] {
    require(config, "config");
    require(ad_id, "ad_id");
    require(allocation, "allocation");
    *allocation = absplit::allocate_copies(ad_id, config->config) == absplit::Allocation::I ? ABSPLIT_ALLOCATION_I
                                                                                              : ABSPLIT_ALLOCATION_II;
  });
}

absplit_status absplit_split_budget(int64_t total_minor, double alpha, int64_t* high_minor, int64_t* low_minor) {
  return guard([&] {
    require(high_minor, "high_minor");
    require(low_minor, "low_minor");
    const auto [high, low] = absplit::split_budget(absplit::Money(total_minor), alpha);
    *high_minor = high.minor();
    *low_minor = low.minor();
  });
}

absplit_status absplit_split_files(const absplit_split_config* config, const char* users_path, const char* ads_path,
                                   const char* out_dir, absplit_report** out) {
  return guard([&] {
    require(config, "config");
    require(users_path, "users_path");
    require(ads_path, "ads_path");
    emit(absplit::workflow::split_files(users_path, ads_path, opt(out_dir), config->config), out);
  });
}

absplit_status absplit_sim_config_from_json(const char* json, absplit_sim_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new absplit_sim_config{absplit::workflow::sim_config_from_json(parse_object(json))};
  });
}

absplit_status absplit_sim_config_set_seed(absplit_sim_config* config, uint64_t seed) {
  return guard([&] {
    require(config, "config");
    config->config.seed = seed;
  });
}

absplit_status absplit_sim_config_describe(const absplit_sim_config* config, absplit_report** out) {
  return guard([&] {
    require(config, "config");
    absplit::workflow::Report r;
    r.json = absplit::workflow::to_json(config->config).dump() + "\n";
    r.table = absplit::workflow::to_json(config->config).dump(2) + "\n";
    emit(std::move(r), out);
  });
}

void absplit_sim_config_free(absplit_sim_config* config) { delete config; }

absplit_status absplit_generate(const absplit_sim_config* config, const char* out_dir, absplit_report** out) {
  return guard([&] {
    require(config, "config");
    emit(absplit::workflow::generate_files(config->config, opt(out_dir)), out);
  });
}

absplit_status absplit_simulate_files(const absplit_sim_config* config, const char* user_assignment_path,
                                      const char* ads_assignment_path, const char* latent_path,
                                      const char* interactions_path, const char* truth_path, absplit_report** out) {
  return guard([&] {
    require(config, "config");
    require(user_assignment_path, "user_assignment_path");
    require(ads_assignment_path, "ads_assignment_path");
    require(interactions_path, "interactions_path");
    absplit::workflow::SimulatePaths p;
    p.user_assignment = user_assignment_path;
    p.ads_assignment = ads_assignment_path;
    p.latent = opt(latent_path);
    p.interactions = interactions_path;
    p.truth = opt(truth_path);
    emit(absplit::workflow::simulate_files(config->config, p), out);
  });
}

absplit_status absplit_dataset_build(const char* user_assignment_path, const char* ads_assignment_path,
                                     const char* interactions_path, const char* outcome_kind, int lenient,
                                     absplit_dataset** out, absplit_report** build_report) {
  return guard([&] {
    require(user_assignment_path, "user_assignment_path");
    require(ads_assignment_path, "ads_assignment_path");
    require(interactions_path, "interactions_path");
    require(out, "out");
    absplit::DatasetPaths paths;
    paths.user_assignment = user_assignment_path;
    paths.ads_assignment = ads_assignment_path;
    paths.interactions = interactions_path;
    absplit::BuildOptions options;
    if (outcome_kind) options.outcome_kind = absplit::parse_interaction_kind(outcome_kind);
    options.lenient = lenient != 0;
    auto result = absplit::build_estimation_data(paths, absplit::SplitConfig{}, options);
    emit(absplit::workflow::build_report(result, ""), build_report);
    *out = new absplit_dataset{std::move(result.rows)};
  });
}

absplit_status absplit_dataset_load(const char* estimation_path, absplit_dataset** out) {
  return guard([&] {
    require(estimation_path, "estimation_path");
    require(out, "out");
    *out = new absplit_dataset{absplit::read_estimation_data(estimation_path)};
  });
}

absplit_status absplit_dataset_save(const absplit_dataset* dataset, const char* estimation_path) {
  return guard([&] {
    require(dataset, "dataset");
    require(estimation_path, "estimation_path");
    absplit::write_estimation_data(estimation_path, dataset->rows);
  });
}

size_t absplit_dataset_rows(const absplit_dataset* dataset) { return dataset ? dataset->rows.size() : 0; }

void absplit_dataset_free(absplit_dataset* dataset) { delete dataset; }

absplit_status absplit_estimate(const absplit_dataset* dataset, const char* spec_json, absplit_report** out) {
  return guard([&] {
    require(dataset, "dataset");
    const auto options = absplit::workflow::estimate_options_from_json(parse_object(spec_json));
    emit(absplit::workflow::estimate_report(dataset->rows, options), out);
  });
}

absplit_status absplit_estimate_lift(const absplit_dataset* dataset, const char* spec_json, absplit_report** out) {
  return guard([&] {
    require(dataset, "dataset");
    const auto options = absplit::workflow::estimate_options_from_json(parse_object(spec_json));
    emit(absplit::workflow::lift_report(dataset->rows, options), out);
  });
}

absplit_status absplit_balance(const char* ads_assignment_path, double significance, const char* segment_feature,
                               absplit_report** out) {
  return guard([&] {
    require(ads_assignment_path, "ads_assignment_path");
    std::optional<std::string> segment;
    if (segment_feature && *segment_feature) segment = segment_feature;
    const auto copies = absplit::read_ads_assignment(ads_assignment_path);
    emit(absplit::workflow::balance_report(copies, significance, segment), out);
  });
}

absplit_status absplit_power(const absplit_sim_config* config, const char* options_json, absplit_report** out) {
  return guard([&] {
    require(config, "config");
    const auto options = absplit::workflow::power_options_from_json(parse_object(options_json));
    emit(absplit::workflow::power_report(config->config, options), out);
  });
}

absplit_status absplit_side_effect(const absplit_sim_config* sim, const absplit_split_config* split, double alpha1,
                                   double significance, const char* users_path, const char* ads_path,
                                   const char* latent_path, absplit_report** out) {
  return guard([&] {
    require(sim, "sim");
    require(split, "split");
    if (!(significance > 0.0 && significance < 1.0))
      absplit::fail(absplit::ErrorCode::InvalidArgument, "significance must lie in (0, 1)");
    absplit::Population population;
    if (ads_path) {
      population.ads = absplit::read_ads(ads_path);
      if (users_path) population.users = absplit::read_users(users_path);
      if (latent_path) population.latent = absplit::read_latent(latent_path);
    } else {
      population = absplit::generate_population(sim->config);
    }
    emit(absplit::workflow::side_effect_report(population, alpha1, split->config, sim->config, significance), out);
  });
}

absplit_status absplit_forecast(const char* result_json, int64_t baseline_budget_minor, double baseline_outcome,
                                const int64_t* levels, size_t n_levels, absplit_report** out) {
  return guard([&] {
    const auto estimate = result_of(result_json);
    const absplit::ForecastBaseline baseline{baseline_budget_minor, baseline_outcome};
    emit(absplit::workflow::forecast_report(estimate, baseline, levels_of(levels, n_levels)), out);
  });
}

absplit_status absplit_forecast_for_ad(const char* result_json, const absplit_dataset* dataset, const char* ad_id,
                                       const int64_t* levels, size_t n_levels, absplit_report** out) {
  return guard([&] {
    require(dataset, "dataset");
    require(ad_id, "ad_id");
    const auto estimate = result_of(result_json);
    const auto baseline = absplit::baseline_for_ad(dataset->rows, ad_id, estimate.rho);
    emit(absplit::workflow::forecast_report(estimate, baseline, levels_of(levels, n_levels)), out);
  });
}

absplit_status absplit_run_all(const absplit_sim_config* sim, const absplit_split_config* split, const char* spec_json,
                               const char* out_dir, absplit_report** out) {
  return guard([&] {
    require(sim, "sim");
    require(split, "split");
    const auto options = absplit::workflow::estimate_options_from_json(parse_object(spec_json));
    emit(absplit::workflow::run_all(sim->config, split->config, options, opt(out_dir)), out);
  });
}

const char* absplit_report_json(const absplit_report* report) { return report ? report->report.json.c_str() : ""; }

const char* absplit_report_table(const absplit_report* report) { return report ? report->report.table.c_str() : ""; }

const char* absplit_report_csv(const absplit_report* report) { return report ? report->report.csv.c_str() : ""; }

int absplit_report_passed(const absplit_report* report) { return report && report->report.passed ? 1 : 0; }

void absplit_report_free(absplit_report* report) { delete report; }

}  // extern "C"
