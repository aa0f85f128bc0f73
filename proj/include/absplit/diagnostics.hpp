#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absplit/estimator.hpp"
#include "absplit/marketsim.hpp"
#include "absplit/stats.hpp"
#include "absplit/types.hpp"

namespace absplit {

struct BudgetMoments {
  std::int64_t count = 0;
  std::int64_t total_minor = 0;
  double mean = 0.0;
  double variance = 0.0;  // n - 1 denominator
};

struct BalanceStats {
  std::string segment;  // empty for the whole copy set
  BudgetMoments m1;
  BudgetMoments m2;
  stats::TwoSampleTest mean_test;      // Welch, M1 minus M2
  stats::TwoSampleTest spread_test;    // Brown-Forsythe
  stats::TwoSampleTest variance_ratio; // F = var(M1) / var(M2), informational
  bool passed = true;
};

// Pass/fail uses the mean and spread tests, each at significance / 2, so the
// false-alarm rate of the pair is at most `significance`.
struct BalanceReport {
  double significance = 0.05;
  BalanceStats overall;
  std::vector<BalanceStats> segments;  // informational, never affect `passed`
  bool passed = true;
};

BalanceReport balance_test(const std::vector<AdCopy>& copies, double significance = 0.05,
                           const std::optional<std::string>& segment_feature = std::nullopt);

// Runs split -> simulate -> pair for one population. Closed-form forms draw
// per-copy counts directly; the auction form runs the micro-simulation over
// the population's users.
std::vector<EstimationRow> simulate_estimation_rows(const Population& population, const SplitConfig& split,
                                                    const SimConfig& sim);

struct PowerOptions {
  std::vector<double> alphas{0.55, 0.6, 0.7, 0.8, 0.9};
  std::int64_t replications = 200;
  RegressionSpec spec{true, {}, true, 0.95};  // fixed effects, weighted
  double power = 0.8;
  double size = 0.05;    // two-sided
  unsigned threads = 1;  // 0 = hardware concurrency
};

struct PowerPoint {
  double alpha = 0.0;
  std::int64_t replications = 0;
  double mean_rho = 0.0;
  double monte_carlo_se = 0.0;    // standard deviation of rho-hat across replications
  double mean_reported_se = 0.0;  // average clustered SE
  double detectable_effect = 0.0; // (z_{1-size/2} + z_power) * monte_carlo_se
};

struct PowerCurve {
  std::int64_t n_ads = 0;
  double power = 0.8;
  double size = 0.05;
  std::vector<PowerPoint> points;  // same order as the alpha grid
};

// Replication r of every alpha uses the same derived seed, so populations,
// copy allocations and noise streams are shared across the grid.
PowerCurve power_analysis(const SimConfig& sim, const PowerOptions& options);

struct SideEffectArm {
  double alpha = 0.5;
  std::int64_t n_ads = 0;
  double mean_total = 0.0;
  double variance_total = 0.0;
  double expected_mean_total = 0.0;  // noise-free, closed-form forms only
};

struct SideEffectReport {
  SideEffectArm asymmetric;  // arm A
  SideEffectArm symmetric;   // arm B
  stats::TwoSampleTest test; // Welch on per-ad totals, A minus B
  double expected_difference = 0.0;
  bool closed_form = true;
};

// Ads hashed into arm A are split at alpha1 (0.5 gives an A/A check), the
// rest at 0.5, using the side-effect namespace of `split`. Per-ad totals of
// both copies are compared across arms.
SideEffectReport side_effect_ab(const Population& population, double alpha1, const SplitConfig& split,
                                const SimConfig& sim);

}  // namespace absplit
