#pragma once

#include <span>
#include <string>
#include <vector>

#include "absplit/types.hpp"
#include "absplit/wls.hpp"

namespace absplit {

struct RegressionSpec {
  bool use_fixed_effects = false;
  // Categorical controls, one-hot expanded with the most frequent level
  // dropped. Mutually exclusive with fixed effects.
  std::vector<std::string> control_features;
  bool use_weights = true;  // w = 1 / RandB^2
  double confidence_level = 0.95;

  void validate() const;
};

// Estimation sample after pairing and exclusions.
//
// RandB enters the regression as the exact half-integer B_ij - B_i / 2, with
// B_i recovered as the sum of the pair's budgets. The stored integer
// rand_b_minor column is checked for consistency but not regressed on, so the
// two copies of an ad always carry weights of equal size.
struct PairedSample {
  struct Pair {
    const EstimationRow* high = nullptr;
    const EstimationRow* low = nullptr;
    double y_high = 0.0;
    double y_low = 0.0;
    double rand_b_high = 0.0;
    double rand_b_low = 0.0;
  };
  std::vector<Pair> pairs;  // sorted by ad_id
  std::int64_t excluded_ads = 0;
};

// Pairs rows by ad (each ad needs exactly one high and one low copy), checks
// budget/rand_b consistency and drops ads whose copies have equal budgets.
// `outcomes`, when non-empty, replaces the integer outcome column (same order
// as `rows`); used to feed noise-free real-valued outcomes.
PairedSample pair_rows(std::span<const EstimationRow> rows, std::span<const double> outcomes = {});

// Design for Y = cons + rho * RandB [+ controls], or with fixed effects the
// per-ad difference (Y_high - Y_low) = rho * (RandB_high - RandB_low) with
// pair weight w_h w_l / (w_h + w_l), which reproduces the within estimator.
DesignMatrix incrementality_design(const PairedSample& sample, const RegressionSpec& spec);

// Same for Y = cons + mu m + rho RandB + drho RandB m [+ controls].
DesignMatrix lift_design(const PairedSample& sample, const RegressionSpec& spec);

IncrementalityEstimate estimate_incrementality(std::span<const EstimationRow> rows, const RegressionSpec& spec,
                                               std::span<const double> outcomes = {});

LiftEstimate estimate_lift(std::span<const EstimationRow> rows, const RegressionSpec& spec,
                           std::span<const double> outcomes = {});

// One fit per level of `segment_feature` (levels in lexicographic order).
std::vector<IncrementalityEstimate> estimate_incrementality_by_segment(std::span<const EstimationRow> rows,
                                                                       const RegressionSpec& spec,
                                                                       const std::string& segment_feature);
std::vector<LiftEstimate> estimate_lift_by_segment(std::span<const EstimationRow> rows, const RegressionSpec& spec,
                                                   const std::string& segment_feature);

// Observational benchmark: OLS of the ad's total outcome (both copies) on its
// total budget B_i with an intercept, one cluster per ad. Biased whenever
// budgets are endogenous.
IncrementalityEstimate estimate_naive_budget_slope(std::span<const EstimationRow> rows,
                                                   std::span<const double> outcomes = {},
                                                   double confidence_level = 0.95);

struct ForecastBaseline {
  std::int64_t budget_minor = 0;  // B_ref
  double expected_outcome = 0.0;  // fitted outcome at B_ref
};

struct ForecastPoint {
  std::int64_t budget_minor = 0;
  double expected_outcome = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// y(B) = y(B_ref) + rho * (B - B_ref). The interval only carries the
// uncertainty of rho (t with n_ads - 1 df); intercept uncertainty is ignored.
std::vector<ForecastPoint> forecast_performance(const IncrementalityEstimate& estimate, const ForecastBaseline& baseline,
                                                const std::vector<std::int64_t>& budget_levels);

// Fitted value of an ad's high copy under the paired model:
// (Y_high + Y_low) / 2 + rho * RandB_high at B_ref = budget of the high copy.
ForecastBaseline baseline_for_ad(std::span<const EstimationRow> rows, const std::string& ad_id, double rho);

}  // namespace absplit
