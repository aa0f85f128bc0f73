#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "absplit/absplit.h"
#include "support.hpp"

using absplit::testing::TempDir;
using nlohmann::json;

namespace {

json first_record(const absplit_report* r) {
  std::istringstream in(absplit_report_json(r));
  std::string line;
  std::getline(in, line);
  return json::parse(line);
}

// First record of the given type, as a raw line.
std::string record_line(const absplit_report* r, const std::string& type) {
  std::istringstream in(absplit_report_json(r));
  for (std::string line; std::getline(in, line);)
    if (json::parse(line).value("type", "") == type) return line;
  ADD_FAILURE() << "no " << type << " record";
  return "{}";
}

struct SimHandle {
  absplit_sim_config* p = nullptr;
  ~SimHandle() { absplit_sim_config_free(p); }
};
struct SplitHandle {
  absplit_split_config* p = nullptr;
  ~SplitHandle() { absplit_split_config_free(p); }
};
struct ReportHandle {
  absplit_report* p = nullptr;
  ~ReportHandle() { absplit_report_free(p); }
};
struct DatasetHandle {
  absplit_dataset* p = nullptr;
  ~DatasetHandle() { absplit_dataset_free(p); }
};

}  // namespace

TEST(CApi, VersionAndStatusStrings) {
  EXPECT_STREQ(absplit_version(), "1.0.0");
  EXPECT_EQ(absplit_format_version(), 1);
  EXPECT_STREQ(absplit_status_string(ABSPLIT_OK), "ok");
  EXPECT_STREQ(absplit_status_string(ABSPLIT_ERR_DATA), "data error");
}

TEST(CApi, SplitBudgetAndErrors) {
  int64_t high = 0, low = 0;
  ASSERT_EQ(absplit_split_budget(5, 0.7, &high, &low), ABSPLIT_OK);
  EXPECT_EQ(high, 4);
  EXPECT_EQ(low, 1);
  EXPECT_EQ(absplit_split_budget(5, 1.0, &high, &low), ABSPLIT_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::strlen(absplit_last_error()), 0u);
  EXPECT_EQ(absplit_split_budget(-5, 0.6, &high, &low), ABSPLIT_ERR_INVALID_ARGUMENT);
  ASSERT_EQ(absplit_split_budget(10, 0.6, &high, &low), ABSPLIT_OK);
  EXPECT_STREQ(absplit_last_error(), "");
}

TEST(CApi, SplitConfigLifecycle) {
  SplitHandle split;
  EXPECT_EQ(absplit_split_config_new(0.4, 1, &split.p), ABSPLIT_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(split.p, nullptr);
  ASSERT_EQ(absplit_split_config_new(0.6, 1, &split.p), ABSPLIT_OK);

  int market = 0, allocation = 0;
  ASSERT_EQ(absplit_assign_user(split.p, "user-1", &market), ABSPLIT_OK);
  EXPECT_TRUE(market == ABSPLIT_M1 || market == ABSPLIT_M2);
  int again = 0;
  absplit_assign_user(split.p, "user-1", &again);
  EXPECT_EQ(market, again);
  ASSERT_EQ(absplit_allocate_copies(split.p, "ad-1", &allocation), ABSPLIT_OK);
  EXPECT_TRUE(allocation == ABSPLIT_ALLOCATION_I || allocation == ABSPLIT_ALLOCATION_II);
  EXPECT_EQ(absplit_assign_user(split.p, "", &market), ABSPLIT_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(absplit_assign_user(nullptr, "x", &market), ABSPLIT_ERR_INVALID_ARGUMENT);

  // A different namespace changes some assignments.
  int changed = 0;
  SplitHandle other;
  ASSERT_EQ(absplit_split_config_new(0.6, 1, &other.p), ABSPLIT_OK);
  ASSERT_EQ(absplit_split_config_set_namespaces(other.p, "other.users", nullptr, nullptr), ABSPLIT_OK);
  for (int i = 0; i < 64; ++i) {
    const auto id = "u" + std::to_string(i);
    int a = 0, b = 0;
    absplit_assign_user(split.p, id.c_str(), &a);
    absplit_assign_user(other.p, id.c_str(), &b);
    changed += a != b;
  }
  EXPECT_GT(changed, 0);

  SplitHandle symmetric;
  ASSERT_EQ(absplit_split_config_new(0.5, 1, &symmetric.p), ABSPLIT_OK);
  ASSERT_EQ(absplit_split_config_set_symmetric(symmetric.p, 1), ABSPLIT_OK);
}

TEST(CApi, SimConfigRejectsUnknownKeys) {
  SimHandle sim;
  EXPECT_EQ(absplit_sim_config_from_json("{\"n_adz\": 5}", &sim.p), ABSPLIT_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(absplit_last_error()).find("n_adz"), std::string::npos) << absplit_last_error();
  EXPECT_EQ(absplit_sim_config_from_json("{not json", &sim.p), ABSPLIT_ERR_INVALID_ARGUMENT);
  ASSERT_EQ(absplit_sim_config_from_json("{\"n_ads\": 7, \"response\": {\"form\": \"linear\"}}", &sim.p), ABSPLIT_OK);
  ReportHandle desc;
  ASSERT_EQ(absplit_sim_config_describe(sim.p, &desc.p), ABSPLIT_OK);
  EXPECT_EQ(first_record(desc.p)["n_ads"], 7);
}

TEST(CApi, RunAllThenEstimateAgain) {
  TempDir dir("capi");
  SimHandle sim;
  ASSERT_EQ(absplit_sim_config_from_json(
                "{\"n_ads\": 800, \"n_users\": 500, \"seed\": 9, \"response\": {\"slope\": 0.002}}", &sim.p),
            ABSPLIT_OK);
  SplitHandle split;
  ASSERT_EQ(absplit_split_config_new(0.7, 9, &split.p), ABSPLIT_OK);
  ReportHandle run;
  ASSERT_EQ(absplit_run_all(sim.p, split.p, "{\"fixed_effects\": true}", dir.str().c_str(), &run.p), ABSPLIT_OK)
      << absplit_last_error();
  std::string line = record_line(run.p, "incrementality");
  const auto rec = json::parse(line);
  EXPECT_EQ(rec["n_ads"], 800);
  const double rho = rec["rho"];
  const double se = rec["se"];
  EXPECT_LT(std::abs(rho - 0.002), 4 * se);

  // Reloading the estimation file reproduces the pipeline's estimate.
  DatasetHandle data;
  ASSERT_EQ(absplit_dataset_load(dir.file("estimation.csv").c_str(), &data.p), ABSPLIT_OK);
  EXPECT_EQ(absplit_dataset_rows(data.p), 1600u);
  ReportHandle est;
  ASSERT_EQ(absplit_estimate(data.p, "{\"fixed_effects\": true}", &est.p), ABSPLIT_OK);
  EXPECT_EQ(first_record(est.p)["rho"].get<double>(), rho);
  EXPECT_NE(std::string(absplit_report_table(est.p)).size(), 0u);

  ReportHandle bad;
  EXPECT_EQ(absplit_estimate(data.p, "{\"fixed_effects\": true, \"controls\": [\"feat_x\"]}", &bad.p),
            ABSPLIT_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(absplit_estimate_lift(data.p, "{\"fixed_effects\": true}", &bad.p), ABSPLIT_ERR_INVALID_ARGUMENT);
  ReportHandle lift;
  ASSERT_EQ(absplit_estimate_lift(data.p, "{\"fixed_effects\": false}", &lift.p), ABSPLIT_OK);
  EXPECT_EQ(first_record(lift.p)["type"], "lift");

  ReportHandle bal;
  ASSERT_EQ(absplit_balance(dir.file("ads_assignment.csv").c_str(), 0.05, nullptr, &bal.p), ABSPLIT_OK);
  EXPECT_EQ(absplit_report_passed(bal.p), 1);

  // Forecast from the stored result line.
  const int64_t levels[] = {6000, 10000};
  ReportHandle fc;
  ASSERT_EQ(absplit_forecast(line.c_str(), 6000, 15.0, levels, 2, &fc.p), ABSPLIT_OK);
  EXPECT_NE(std::string(absplit_report_csv(fc.p)).find("10000"), std::string::npos);
  const int64_t negative[] = {-1};
  EXPECT_EQ(absplit_forecast(line.c_str(), 6000, 15.0, negative, 1, &fc.p), ABSPLIT_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(absplit_forecast("{", 6000, 15.0, levels, 2, &fc.p), ABSPLIT_ERR_PARSE);
}

TEST(CApi, MissingFilesAreIoErrors) {
  DatasetHandle data;
  EXPECT_EQ(absplit_dataset_load("/nonexistent/estimation.csv", &data.p), ABSPLIT_ERR_IO);
  ReportHandle r;
  EXPECT_EQ(absplit_balance("/nonexistent/ads.csv", 0.05, nullptr, &r.p), ABSPLIT_ERR_IO);
}
