#include <cmath>

#include <gtest/gtest.h>

#include "absplit/diagnostics.hpp"
#include "absplit/hashing.hpp"

using namespace absplit;

namespace {

SimConfig linear_sim(std::int64_t n_ads, std::uint64_t seed) {
  SimConfig c;
  c.n_ads = n_ads;
  c.n_users = 100;
  c.response.slope = 0.002;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Balance, EvenSymmetricSplitIsExactlyBalanced) {
  // Even totals at alpha 0.5 give identical budget multisets in M1 and M2.
  std::vector<Ad> ads;
  for (int i = 0; i < 200; ++i) ads.push_back({"a" + std::to_string(i), Money(2 * (100 + 13 * i)), {}, std::nullopt});
  SplitConfig split;
  split.alpha = 0.5;
  split.allow_symmetric = true;
  const auto report = balance_test(split_ads(ads, split));
  EXPECT_EQ(report.overall.mean_test.difference, 0.0);
  EXPECT_EQ(report.overall.mean_test.p_value, 1.0);
  EXPECT_TRUE(report.passed);
  EXPECT_EQ(report.overall.m1.total_minor + report.overall.m2.total_minor,
            [&] {
              std::int64_t t = 0;
              for (const auto& a : ads) t += a.total_budget.minor();
              return t;
            }());
}

TEST(Balance, RandomizedAllocationPassesAndCorruptedFails) {
  auto c = linear_sim(3000, 21);
  const auto pop = generate_population(c);
  SplitConfig split;
  split.seed = 21;
  auto copies = split_ads(pop.ads, split);
  EXPECT_TRUE(balance_test(copies).passed);

  // Send every high copy to M1.
  for (auto& cp : copies) cp.submarket = cp.copy_type == CopyType::High ? SubMarket::M1 : SubMarket::M2;
  const auto bad = balance_test(copies);
  EXPECT_FALSE(bad.passed);
  EXPECT_LT(bad.overall.mean_test.p_value, 1e-6);
}

TEST(Balance, SegmentsAreInformational) {
  auto c = linear_sim(400, 22);
  c.segments = {{"a", 1.0, 1.0}, {"b", 1.0, 1.0}};
  const auto pop = generate_population(c);
  const auto report = balance_test(split_ads(pop.ads, SplitConfig{}), 0.05, std::string("feat_segment"));
  ASSERT_EQ(report.segments.size(), 2u);
  EXPECT_EQ(report.segments[0].segment, "feat_segment=a");
  EXPECT_EQ(report.segments[0].m1.count + report.segments[1].m1.count, report.overall.m1.count);
  EXPECT_THROW(balance_test({}), Error);
  EXPECT_THROW(balance_test(split_ads(pop.ads, SplitConfig{}), 1.5), Error);
}

TEST(Power, RejectsBadOptions) {
  const auto c = linear_sim(100, 1);
  PowerOptions o;
  o.replications = 49;
  EXPECT_THROW(power_analysis(c, o), Error);
  o.replications = 50;
  o.alphas = {0.5};
  EXPECT_THROW(power_analysis(c, o), Error);
  o.alphas = {};
  EXPECT_THROW(power_analysis(c, o), Error);
}

TEST(Power, CurveShapeAndSampleSizeScaling) {
  PowerOptions o;
  o.alphas = {0.6, 0.8};
  o.replications = 100;
  const auto small = power_analysis(linear_sim(500, 2), o);
  const auto large = power_analysis(linear_sim(1000, 2), o);
  ASSERT_EQ(small.points.size(), 2u);
  for (std::size_t a = 0; a < 2; ++a) {
    EXPECT_EQ(small.points[a].replications, 100);
    // Unbiased around the true slope.
    EXPECT_NEAR(small.points[a].mean_rho, 0.002, 4 * small.points[a].monte_carlo_se / 10);
    // Clustered SE tracks the replication spread.
    EXPECT_NEAR(small.points[a].mean_reported_se / small.points[a].monte_carlo_se, 1.0, 0.2);
    const double z = stats::normal_quantile(0.975) + stats::normal_quantile(0.8);
    EXPECT_NEAR(small.points[a].detectable_effect, z * small.points[a].monte_carlo_se, 1e-15);
  }
  // Larger asymmetry buys precision; doubling ads shrinks SE by about 1/sqrt(2).
  EXPECT_LT(small.points[1].mean_reported_se, small.points[0].mean_reported_se);
  const double ratio = large.points[0].mean_reported_se / small.points[0].mean_reported_se;
  EXPECT_NEAR(ratio, 1.0 / std::sqrt(2.0), 0.1 / std::sqrt(2.0));

  // Same seed, same curve.
  const auto again = power_analysis(linear_sim(500, 2), o);
  EXPECT_EQ(again.points[0].mean_rho, small.points[0].mean_rho);
}

TEST(SideEffect, LinearResponseHasNoExpectedDifference) {
  auto c = linear_sim(2000, 3);
  const auto pop = generate_population(c);
  SplitConfig split;
  split.seed = 3;
  const auto r = side_effect_ab(pop, 0.9, split, c);
  EXPECT_TRUE(r.closed_form);
  EXPECT_EQ(r.asymmetric.alpha, 0.9);
  EXPECT_EQ(r.asymmetric.n_ads + r.symmetric.n_ads, 2000);
  // Per ad, both arms expect slope * B in total, so only the budget mix differs.
  double expected_a = 0, expected_b = 0;
  {
    std::vector<Ad> ads = pop.ads;
    std::int64_t na = 0, nb = 0;
    for (const auto& ad : ads) {
      const bool arm_a = hash_bit(stable_hash(split.namespaces.side_effect, split.seed, ad.ad_id));
      (arm_a ? expected_a : expected_b) += 0.002 * static_cast<double>(ad.total_budget.minor());
      (arm_a ? na : nb) += 1;
    }
    expected_a /= static_cast<double>(na);
    expected_b /= static_cast<double>(nb);
  }
  EXPECT_NEAR(r.asymmetric.expected_mean_total, expected_a, 1e-9 * expected_a);
  EXPECT_NEAR(r.symmetric.expected_mean_total, expected_b, 1e-9 * expected_b);
}

TEST(SideEffect, ConcaveResponseLosesVolumeUnderAsymmetry) {
  auto c = linear_sim(500, 4);
  c.response.form = ResponseForm::ConcavePower;
  c.response.scale = 0.2;
  c.response.exponent = 0.5;
  c.budget.kind = BudgetDistribution::Kind::Fixed;
  const auto pop = generate_population(c);
  const auto r = side_effect_ab(pop, 0.9, SplitConfig{}, c);
  // sqrt(9000) + sqrt(1000) < 2 sqrt(5000) at the fixed total of 10000.
  const double per_ad_a = 0.2 * (std::sqrt(9000.0) + std::sqrt(1000.0));
  const double per_ad_b = 0.2 * 2 * std::sqrt(5000.0);
  EXPECT_NEAR(r.expected_difference, per_ad_a - per_ad_b, 1e-9);
  EXPECT_LT(r.test.difference, 0.0);
}

TEST(SideEffect, AaComparisonAndArgumentChecks) {
  const auto c = linear_sim(300, 5);
  const auto pop = generate_population(c);
  const auto r = side_effect_ab(pop, 0.5, SplitConfig{}, c);
  EXPECT_EQ(r.asymmetric.alpha, 0.5);
  EXPECT_GT(r.asymmetric.n_ads, 0);
  EXPECT_GT(r.symmetric.n_ads, 0);
  EXPECT_THROW(side_effect_ab(pop, 1.0, SplitConfig{}, c), Error);
  EXPECT_THROW(side_effect_ab(pop, 0.45, SplitConfig{}, c), Error);
}
