#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "absplit/estimator.hpp"
#include "absplit/marketsim.hpp"
#include "absplit/pipeline.hpp"
#include "absplit/stats.hpp"
#include "rows.hpp"

using namespace absplit;
using absplit::testing::ad_rows;
using absplit::testing::append;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an absplit::Error";
  return ErrorCode::InvalidArgument;
}

RegressionSpec fe(bool weights = true) { return RegressionSpec{true, {}, weights, 0.95}; }
RegressionSpec pooled(bool weights = true) { return RegressionSpec{false, {}, weights, 0.95}; }

std::vector<EstimationRow> random_rows(int n_ads, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> budget(500, 50000), y(0, 80);
  std::vector<EstimationRow> rows;
  for (int i = 0; i < n_ads; ++i) {
    const double alpha = i % 3 == 0 ? 0.7 : 0.6;
    append(rows, ad_rows("ad" + std::to_string(i), budget(rng), alpha, y(rng), y(rng),
                         i % 2 == 0 ? SubMarket::M1 : SubMarket::M2));
  }
  return rows;
}

// Weighted least squares with one dummy per ad, solved from the normal
// equations; the slope is the last coefficient. Returns (slope, clustered SE)
// with the CR1 factor G/(G-1) * (N-1)/(N-1).
std::pair<double, double> dummy_variable_fit(const std::vector<EstimationRow>& rows, bool weights) {
  std::map<std::string, int> index;
  for (const auto& r : rows) index.try_emplace(r.ad_id, static_cast<int>(index.size()));
  const int g = static_cast<int>(index.size());
  const int n = static_cast<int>(rows.size());
  std::map<std::string, std::int64_t> total;
  for (const auto& r : rows) total[r.ad_id] += r.budget.minor();

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, g + 1);
  Eigen::VectorXd y(n), w(n);
  for (int k = 0; k < n; ++k) {
    const auto& r = rows[static_cast<std::size_t>(k)];
    const double rb = static_cast<double>(r.budget.minor()) - 0.5 * static_cast<double>(total[r.ad_id]);
    x(k, index[r.ad_id]) = 1.0;
    x(k, g) = rb;
    y[k] = static_cast<double>(r.outcome);
    w[k] = weights ? 1.0 / (rb * rb) : 1.0;
  }
  const Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
  const Eigen::MatrixXd bread = (xtw * x).inverse();
  const Eigen::VectorXd beta = bread * (xtw * y);
  const Eigen::VectorXd e = y - x * beta;
  std::vector<double> score(static_cast<std::size_t>(g), 0.0);
  for (int k = 0; k < n; ++k) score[static_cast<std::size_t>(index[rows[static_cast<std::size_t>(k)].ad_id])] += w[k] * e[k] * x(k, g);
  double meat = 0.0;
  for (double s : score) meat += s * s;
  const double v = (g / (g - 1.0)) * bread(g, g) * bread(g, g) * meat;
  return {beta[g], std::sqrt(v)};
}

}  // namespace

TEST(Incrementality, TwoAdHandExample) {
  std::vector<EstimationRow> rows;
  append(rows, ad_rows("A", 10000, 0.6, 16, 10));
  append(rows, ad_rows("B", 20000, 0.6, 30, 22, SubMarket::M2));
  const double expected = ((16.0 - 10.0) / 2000.0 + (30.0 - 22.0) / 4000.0) / 2.0;
  ASSERT_DOUBLE_EQ(expected, 0.0025);

  // Two clusters are too few for inference, so check the point estimate on
  // the design and its normal equations directly.
  const auto sample = [&] {
    std::vector<EstimationRow> padded = rows;
    append(padded, ad_rows("C", 30000, 0.6, 1, 0));
    return padded;
  }();
  std::span<const EstimationRow> two(rows);
  EXPECT_EQ(code_of([&] { estimate_incrementality(two, fe()); }), ErrorCode::Estimation);

  // pair_rows needs three ads; build the two-ad sample from the padded one.
  auto paired = pair_rows(sample);
  paired.pairs.pop_back();
  const auto d = incrementality_design(paired, fe());
  const auto fit = wls_fit(d);
  EXPECT_NEAR(fit.coefficients[0], expected, 1e-15);
  const double brute = (d.x.col(0).cwiseProduct(d.w).dot(d.y)) / (d.x.col(0).cwiseProduct(d.w).dot(d.x.col(0)));
  EXPECT_NEAR(brute, expected, 1e-15);
}

TEST(Incrementality, FixedEffectsMatchDummyVariableRegression) {
  const auto rows = random_rows(60, 1);
  for (bool weights : {true, false}) {
    const auto [slope, se] = dummy_variable_fit(rows, weights);
    const auto est = estimate_incrementality(rows, fe(weights));
    EXPECT_NEAR(est.rho, slope, 1e-10 * std::abs(slope)) << weights;
    EXPECT_NEAR(est.se, se, 1e-8 * se) << weights;
    EXPECT_EQ(est.n_ads, 60);
    const double t = stats::student_t_quantile(0.975, 59);
    EXPECT_NEAR(est.ci_high - est.ci_low, 2 * t * est.se, 1e-12);
  }
}

TEST(Incrementality, WeightedFixedEffectsAverageSlopes) {
  const auto rows = random_rows(200, 2);
  double sum = 0.0;
  for (std::size_t k = 0; k < rows.size(); k += 2)
    sum += static_cast<double>(rows[k].outcome - rows[k + 1].outcome) /
           static_cast<double>(rows[k].budget.minor() - rows[k + 1].budget.minor());
  EXPECT_NEAR(estimate_incrementality(rows, fe()).rho, sum / 200, 1e-12);
}

TEST(Incrementality, NoiselessLinearRecoversSlope) {
  SimConfig c;
  c.n_ads = 1000;
  c.response.slope = 0.002;
  c.response.noise = NoiseKind::None;
  c.seed = 12;
  const auto pop = generate_population(c);
  SplitConfig split;
  split.seed = 12;
  const auto copies = split_ads(pop.ads, split);
  const auto truth = expected_outcomes(copies, {}, c);
  const auto rows = to_estimation_rows(copies, std::vector<std::int64_t>(copies.size(), 0));
  for (const auto& spec : {fe(), pooled()}) {
    const auto est = estimate_incrementality(rows, spec, truth);
    EXPECT_NEAR(est.rho, 0.002, 0.002 * 1e-9);
  }
}

TEST(Incrementality, ConstantOutcomesGiveZero) {
  std::vector<EstimationRow> rows;
  for (int i = 0; i < 10; ++i) append(rows, ad_rows("a" + std::to_string(i), 1000 + 37 * i, 0.6, 4, 4));
  const auto est = estimate_incrementality(rows, fe());
  EXPECT_EQ(est.rho, 0.0);
  EXPECT_EQ(est.se, 0.0);
  EXPECT_EQ(est.t_stat, 0.0);
  EXPECT_EQ(est.p_value, 1.0);
}

TEST(Incrementality, TranslationChangesNothingButTheIntercept) {
  auto rows = random_rows(50, 3);
  const auto a_fe = estimate_incrementality(rows, fe());
  const auto a_pool = estimate_incrementality(rows, pooled());
  for (auto& r : rows) r.outcome += 7;
  const auto b_fe = estimate_incrementality(rows, fe());
  const auto b_pool = estimate_incrementality(rows, pooled());
  EXPECT_EQ(a_fe.rho, b_fe.rho);
  EXPECT_EQ(a_fe.se, b_fe.se);
  EXPECT_NEAR(a_pool.rho, b_pool.rho, 1e-12 * std::abs(a_pool.rho) + 1e-15);
  EXPECT_NEAR(a_pool.se, b_pool.se, 1e-9 * a_pool.se);
}

TEST(Incrementality, EqualBudgetAdsAreExcluded) {
  auto rows = random_rows(10, 4);
  append(rows, ad_rows("even", 2, 0.6, 1, 1));  // 0.6 * 2 rounds to 1, 1
  append(rows, ad_rows("zero", 0, 0.6, 0, 0));
  const auto est = estimate_incrementality(rows, fe());
  EXPECT_EQ(est.n_excluded_ads, 2);
  EXPECT_EQ(est.n_ads, 10);

  std::vector<EstimationRow> mostly_even = random_rows(3, 5);
  for (int i = 0; i < 4; ++i) append(mostly_even, ad_rows("z" + std::to_string(i), 0, 0.6, 0, 0));
  EXPECT_EQ(code_of([&] { estimate_incrementality(mostly_even, fe()); }), ErrorCode::Estimation);
}

TEST(Incrementality, MalformedPairsRejected) {
  auto rows = random_rows(5, 6);
  auto dup = rows;
  dup.push_back(rows[0]);
  EXPECT_EQ(code_of([&] { estimate_incrementality(dup, fe()); }), ErrorCode::Data);
  auto same = rows;
  same[1].submarket = same[0].submarket;
  EXPECT_EQ(code_of([&] { estimate_incrementality(same, fe()); }), ErrorCode::Data);
  auto bad_rand_b = rows;
  bad_rand_b[0].rand_b.minor += 2;
  EXPECT_EQ(code_of([&] { estimate_incrementality(bad_rand_b, fe()); }), ErrorCode::Data);
  RegressionSpec both = fe();
  both.control_features = {"feat_region"};
  EXPECT_EQ(code_of([&] { estimate_incrementality(rows, both); }), ErrorCode::InvalidArgument);
  RegressionSpec level = fe();
  level.confidence_level = 1.0;
  EXPECT_EQ(code_of([&] { estimate_incrementality(rows, level); }), ErrorCode::InvalidArgument);
}

TEST(Controls, OneHotDropsMostFrequentLevel) {
  std::vector<EstimationRow> rows;
  const char* levels[] = {"north", "south", "south", "east", "south", "north", "east", "south"};
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> y(0, 50);
  for (int i = 0; i < 8; ++i) {
    FeatureVector f;
    f.set("feat_region", levels[i]);
    f.set("feat_copy", levels[(i + 3) % 8]);
    append(rows, ad_rows("a" + std::to_string(i), 1000 * (i + 2), 0.7, y(rng), y(rng), SubMarket::M1, f));
  }
  RegressionSpec spec = pooled();
  spec.control_features = {"feat_region"};
  const auto d = incrementality_design(pair_rows(rows), spec);
  EXPECT_EQ(d.column_names, (std::vector<std::string>{"cons", "rand_b", "feat_region=east", "feat_region=north"}));
  EXPECT_NO_THROW(estimate_incrementality(rows, spec));

  // A relabelled copy of the same feature is perfectly collinear.
  for (auto& r : rows) r.features.set("feat_dup", std::string(r.features.get("feat_region").value()) + "!");
  spec.control_features = {"feat_region", "feat_dup"};
  try {
    estimate_incrementality(rows, spec);
    FAIL() << "expected a rank error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Estimation);
    EXPECT_NE(std::string(e.what()).find("feat_"), std::string::npos) << e.what();
  }
  spec.control_features = {"feat_missing"};
  EXPECT_EQ(code_of([&] { estimate_incrementality(rows, spec); }), ErrorCode::Data);
}

TEST(Segments, EachSegmentIsAnIndependentFit) {
  std::vector<EstimationRow> rows;
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::int64_t> y(0, 50);
  for (int i = 0; i < 30; ++i) {
    FeatureVector f;
    f.set("feat_region", i % 3 == 0 ? "west" : "east");
    append(rows, ad_rows("a" + std::to_string(i), 900 + 113 * i, 0.6, y(rng), y(rng), SubMarket::M2, f));
  }
  const auto seg = estimate_incrementality_by_segment(rows, fe(), "feat_region");
  ASSERT_EQ(seg.size(), 2u);
  EXPECT_EQ(seg[0].segment, "feat_region=east");
  EXPECT_EQ(seg[1].segment, "feat_region=west");
  std::vector<EstimationRow> west;
  for (const auto& r : rows)
    if (r.features.get("feat_region") == std::optional<std::string_view>("west")) west.push_back(r);
  EXPECT_EQ(seg[1].rho, estimate_incrementality(west, fe()).rho);
  EXPECT_EQ(seg[1].n_ads, 10);
}

TEST(Lift, RecoversMechanismDifferenceWithFixedBudgets) {
  SimConfig c;
  c.n_ads = 400;
  c.response.slope = 0.002;
  c.response.noise = NoiseKind::None;
  c.budget.kind = BudgetDistribution::Kind::Fixed;
  c.budget.fixed_minor = 10000;
  ResponseModel t = c.response;
  t.slope = 0.003;
  c.treatment = t;
  const auto pop = generate_population(c);
  const auto copies = split_ads(pop.ads, SplitConfig{});
  const auto truth = expected_outcomes(copies, {}, c);
  const auto rows = to_estimation_rows(copies, std::vector<std::int64_t>(copies.size(), 0));
  const auto lift = estimate_lift(rows, pooled(), truth);
  EXPECT_NEAR(lift.rho.value, 0.002, 0.002 * 1e-6);
  EXPECT_NEAR(lift.delta_rho.value, 0.001, 0.001 * 1e-6);
  EXPECT_EQ(code_of([&] { estimate_lift(rows, fe(), truth); }), ErrorCode::InvalidArgument);
}

TEST(Lift, SymmetricMechanismsAndConstantShift) {
  std::vector<EstimationRow> rows;
  for (int i = 0; i < 40; ++i) {
    // Equal totals; outcome 0.002 * budget, plus 5 when the copy runs in M2.
    const SubMarket high_market = i % 2 == 0 ? SubMarket::M1 : SubMarket::M2;
    const auto r = ad_rows("a" + std::to_string(i), 10000, 0.6, 0, 0, high_market);
    append(rows, r);
  }
  std::vector<double> same, shifted;
  for (const auto& r : rows) {
    same.push_back(0.002 * static_cast<double>(r.budget.minor()));
    shifted.push_back(same.back() + 5.0 * r.treatment());
  }
  const auto a = estimate_lift(rows, pooled(), same);
  EXPECT_NEAR(a.mu.value, 0.0, 1e-12);
  EXPECT_NEAR(a.delta_rho.value, 0.0, 1e-15);
  EXPECT_NEAR(a.rho.value, 0.002, 1e-15);
  const auto b = estimate_lift(rows, pooled(), shifted);
  EXPECT_NEAR(b.mu.value, 5.0, 1e-10);
  EXPECT_NEAR(b.delta_rho.value, 0.0, 1e-15);
}

TEST(Naive, RecoversTotalBudgetSlope) {
  std::vector<EstimationRow> rows;
  std::vector<double> y;
  for (int i = 0; i < 20; ++i) {
    const auto r = ad_rows("a" + std::to_string(i), 1000 + 500 * i, 0.6, 0, 0);
    append(rows, r);
    const double total = 2.0 + 0.003 * static_cast<double>(1000 + 500 * i);
    y.push_back(0.7 * total);
    y.push_back(0.3 * total);
  }
  const auto est = estimate_naive_budget_slope(rows, y);
  EXPECT_NEAR(est.rho, 0.003, 1e-14);
  EXPECT_EQ(est.n_ads, 20);
}

TEST(Forecast, LinearExtrapolation) {
  IncrementalityEstimate e;
  e.rho = 0.0025;
  e.se = 0.0005;
  e.n_ads = 11;
  const auto pts = forecast_performance(e, {6000, 15.0}, {6000, 10000});
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_DOUBLE_EQ(pts[0].expected_outcome, 15.0);
  EXPECT_EQ(pts[0].ci_low, 15.0);
  EXPECT_EQ(pts[0].ci_high, 15.0);
  EXPECT_DOUBLE_EQ(pts[1].expected_outcome, 25.0);
  EXPECT_NEAR(pts[1].ci_high - pts[1].expected_outcome, 2.228138852 * 0.0005 * 4000, 1e-6);
  EXPECT_THROW(forecast_performance(e, {6000, 15.0}, {-1}), Error);
}

TEST(Forecast, NoiselessLinearMatchesTrueMean) {
  // E[Y] = 3 + 0.002 B with budgets in multiples of 500 keeps counts exact.
  std::vector<EstimationRow> rows;
  for (int i = 1; i <= 12; ++i) {
    const std::int64_t total = 5000 * i;
    const auto [high, low] = split_budget(Money(total), 0.6);
    append(rows, ad_rows("a" + std::to_string(i), total, 0.6, 3 + high.minor() / 500, 3 + low.minor() / 500));
  }
  const auto est = estimate_incrementality(rows, fe());
  EXPECT_NEAR(est.rho, 0.002, 1e-15);
  const auto base = baseline_for_ad(rows, "a2", est.rho);
  EXPECT_EQ(base.budget_minor, 6000);
  const auto pts = forecast_performance(est, base, {12345, 6000});
  EXPECT_NEAR(pts[0].expected_outcome, 3.0 + 0.002 * 12345, 1e-6 * pts[0].expected_outcome);
  EXPECT_NEAR(pts[1].expected_outcome, 15.0, 1e-12);
  EXPECT_THROW(baseline_for_ad(rows, "nope", est.rho), Error);
}
