#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "absplit/assigner.hpp"
#include "absplit/marketsim.hpp"
#include "absplit/stats.hpp"

using namespace absplit;

namespace {

std::vector<AdCopy> one_ad(std::int64_t high, std::int64_t low, Allocation a = Allocation::I) {
  const Money total(high + low);
  return {AdCopy{"ad1", CopyType::High, submarket_of(a, CopyType::High), Money(high), total,
                 rand_b_minor(Money(high), total), {}},
          AdCopy{"ad1", CopyType::Low, submarket_of(a, CopyType::Low), Money(low), total,
                 rand_b_minor(Money(low), total), {}}};
}

SimConfig noiseless(ResponseForm form) {
  SimConfig c;
  c.response.form = form;
  c.response.noise = NoiseKind::None;
  return c;
}

}  // namespace

TEST(ResponseModel, ClosedFormMeans) {
  ResponseModel m;
  m.form = ResponseForm::Saturating;
  m.max_level = 100;
  m.half_saturation = 10000;
  EXPECT_DOUBLE_EQ(m.mean(10000), 50.0);
  EXPECT_DOUBLE_EQ(m.slope_between(0, 10000), 0.005);

  m.form = ResponseForm::ConcavePower;
  m.scale = 1.0;
  m.exponent = 0.5;
  EXPECT_NEAR(m.slope_between(4000, 6000), (std::sqrt(6000.0) - std::sqrt(4000.0)) / 2000.0, 1e-15);
  EXPECT_NEAR(m.slope_between(4000, 4000), 0.5 / std::sqrt(4000.0), 1e-15);

  m.form = ResponseForm::Linear;
  m.slope = 0.002;
  EXPECT_DOUBLE_EQ(m.slope_between(4000, 6000), 0.002);
  EXPECT_THROW(parse_response_form("cubic"), Error);
}

TEST(SimulateCounts, NoiselessConcaveRoundsTheMean) {
  auto c = noiseless(ResponseForm::ConcavePower);
  c.response.scale = 1.0;
  c.response.exponent = 0.5;
  const auto counts = simulate_counts(one_ad(6000, 4000), {}, c);
  EXPECT_EQ(counts, (std::vector<std::int64_t>{77, 63}));  // sqrt 6000 = 77.46, sqrt 4000 = 63.25
}

TEST(SimulateCounts, NoiselessLinear) {
  auto c = noiseless(ResponseForm::Linear);
  c.response.slope = 0.002;
  EXPECT_EQ(simulate_counts(one_ad(6000, 4000), {}, c), (std::vector<std::int64_t>{12, 8}));
}

TEST(SimulateCounts, TreatmentMechanismAppliesInSecondMarket) {
  auto c = noiseless(ResponseForm::Linear);
  c.response.slope = 0.002;
  ResponseModel t = c.response;
  t.slope = 0.004;
  t.base = 5;
  c.treatment = t;
  // Allocation II sends the high copy to M2.
  EXPECT_EQ(simulate_counts(one_ad(6000, 4000, Allocation::II), {}, c), (std::vector<std::int64_t>{29, 8}));
}

TEST(SimulateCounts, PoissonMeanMatchesExpectation) {
  SimConfig c;
  c.response.slope = 0.01;
  c.seed = 3;
  std::vector<AdCopy> copies;
  for (int i = 0; i < 4000; ++i) {
    auto pair = one_ad(3000, 2000);
    for (auto& p : pair) p.ad_id = "ad" + std::to_string(i);
    copies.insert(copies.end(), pair.begin(), pair.end());
  }
  const auto counts = simulate_counts(copies, {}, c);
  double hi = 0, lo = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) (k % 2 == 0 ? hi : lo) += static_cast<double>(counts[k]);
  // Means 30 and 20; standard error of each average is about 0.09.
  EXPECT_NEAR(hi / 4000, 30.0, 0.4);
  EXPECT_NEAR(lo / 4000, 20.0, 0.4);
}

TEST(GeneratePopulation, ConfoundingAndQualityMoments) {
  SimConfig c;
  c.n_ads = 20000;
  c.n_users = 10;
  c.confounding_strength = 0.8;
  c.quality_sigma = 0.5;
  c.seed = 11;
  const auto pop = generate_population(c);
  ASSERT_EQ(pop.ads.size(), 20000u);
  std::vector<double> log_b, zq, q;
  for (std::size_t i = 0; i < pop.ads.size(); ++i) {
    log_b.push_back(std::log(static_cast<double>(pop.ads[i].total_budget.minor())));
    zq.push_back(pop.latent[i].quality_score);
    q.push_back(pop.latent[i].quality_multiplier);
    EXPECT_NEAR(q.back(), std::exp(0.5 * zq.back() - 0.125), 1e-12);
  }
  EXPECT_NEAR(stats::correlation(log_b, zq), 0.8, 0.015);
  EXPECT_NEAR(stats::mean(q), 1.0, 0.02);
  EXPECT_NEAR(stats::mean(log_b), c.budget.log_mean, 0.02);
}

TEST(GeneratePopulation, DeterministicPerSeed) {
  SimConfig c;
  c.n_ads = 50;
  c.n_users = 20;
  c.seed = 5;
  c.segments = {{"north", 1.0, 1.0}, {"south", 3.0, 2.0}};
  const auto a = generate_population(c);
  const auto b = generate_population(c);
  EXPECT_EQ(a.ads, b.ads);
  EXPECT_EQ(a.latent, b.latent);
  EXPECT_EQ(a.users, b.users);
  c.seed = 6;
  EXPECT_NE(generate_population(c).ads, a.ads);
  std::set<std::string> levels;
  for (const auto& ad : a.ads) levels.insert(std::string(ad.features.get("feat_segment").value()));
  EXPECT_EQ(levels, (std::set<std::string>{"north", "south"}));
}

TEST(GeneratePopulation, FixedBudgets) {
  SimConfig c;
  c.n_ads = 10;
  c.budget.kind = BudgetDistribution::Kind::Fixed;
  c.budget.fixed_minor = 777;
  for (const auto& ad : generate_population(c).ads) EXPECT_EQ(ad.total_budget.minor(), 777);
}

TEST(SimulateOutcomes, AttributesToOwnSubMarket) {
  SimConfig c;
  c.n_ads = 40;
  c.n_users = 200;
  c.response.slope = 0.02;
  c.seed = 8;
  c.outcome_kind = InteractionKind::Click;
  const auto pop = generate_population(c);
  SplitConfig split;
  split.seed = 8;
  const auto copies = split_ads(pop.ads, split);
  const auto users = assign_users(pop.users, split);
  const auto latent = index_latent(pop.latent);
  const auto log = simulate_outcomes(copies, latent, users, c);
  const auto counts = simulate_counts(copies, latent, c);

  std::map<std::string, SubMarket> market;
  for (const auto& u : users) market[u.user_id] = u.submarket;
  std::map<std::pair<std::string, SubMarket>, std::int64_t> seen;
  for (const auto& it : log) {
    EXPECT_EQ(it.kind, InteractionKind::Click);
    ++seen[{it.ad_id, market.at(it.user_id)}];
  }
  for (std::size_t k = 0; k < copies.size(); ++k)
    EXPECT_EQ((seen[{copies[k].ad_id, copies[k].submarket}]), counts[k]) << copies[k].ad_id;
  EXPECT_TRUE(std::is_sorted(log.begin(), log.end(), [](const Interaction& a, const Interaction& b) {
    return a.timestamp_ms < b.timestamp_ms;
  }));
  EXPECT_EQ(log, simulate_outcomes(copies, latent, users, c));
}

TEST(GroundTruth, LinearSlopeScaledByQuality) {
  SimConfig c;
  c.n_ads = 30;
  c.quality_sigma = 0.7;
  c.response.slope = 0.003;
  const auto pop = generate_population(c);
  SplitConfig split;
  const auto latent = index_latent(pop.latent);
  for (const auto& t : ground_truth(split_ads(pop.ads, split), latent, c)) {
    EXPECT_NEAR(t.slope_control, 0.003 * latent.at(t.ad_id).quality_multiplier, 1e-15);
    EXPECT_EQ(t.slope_control, t.slope_treatment);
  }
}

TEST(AuctionMicro, BudgetsRespectedAndHighCopiesWinMore) {
  SimConfig c;
  c.response.form = ResponseForm::AuctionMicro;
  c.n_ads = 20;
  c.n_users = 400;
  c.seed = 4;
  c.budget.log_mean = 7.0;
  const auto pop = generate_population(c);
  SplitConfig split;
  split.alpha = 0.8;
  split.seed = 4;
  const auto copies = split_ads(pop.ads, split);
  const auto users = assign_users(pop.users, split);
  const auto result = simulate_market_micro(copies, index_latent(pop.latent), users, c);
  ASSERT_EQ(result.per_copy.size(), copies.size());
  std::int64_t high_imp = 0, low_imp = 0;
  for (std::size_t k = 0; k < copies.size(); ++k) {
    const auto& s = result.per_copy[k];
    EXPECT_EQ(s.ad_id, copies[k].ad_id);
    EXPECT_LE(s.spent, s.budget);
    EXPECT_EQ(s.budget, copies[k].budget.minor());
    EXPECT_LE(s.clicks, s.impressions);
    EXPECT_LE(s.conversions, s.clicks);
    (copies[k].copy_type == CopyType::High ? high_imp : low_imp) += s.impressions;
  }
  EXPECT_GT(high_imp, low_imp);
  EXPECT_GT(low_imp, 0);

  std::map<std::string, SubMarket> market;
  for (const auto& u : users) market[u.user_id] = u.submarket;
  std::map<std::pair<std::string, SubMarket>, CopyType> copy_of;
  for (const auto& cp : copies) copy_of[{cp.ad_id, cp.submarket}] = cp.copy_type;
  for (const auto& it : result.interactions) EXPECT_TRUE(copy_of.count({it.ad_id, market.at(it.user_id)}));
}
