#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "absplit/stats.hpp"
#include "absplit/types.hpp"

using namespace absplit;
using namespace absplit::stats;

namespace {

struct Moments {
  double mean, var;
};

Moments moments(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  const double m = s / xs.size();
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, ss / (xs.size() - 1)};
}

}  // namespace

TEST(Stats, MeanVarianceCorrelation) {
  const std::vector<double> xs{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(mean(xs), 2.5);
  EXPECT_NEAR(variance(xs), 5.0 / 3.0, 1e-15);
  EXPECT_EQ(variance(std::vector<double>{7.0}), 0.0);
  const std::vector<double> ys{2, 4, 6, 8};
  EXPECT_NEAR(correlation(xs, ys), 1.0, 1e-15);
  const std::vector<double> zs{8, 6, 4, 2};
  EXPECT_NEAR(correlation(xs, zs), -1.0, 1e-15);
}

TEST(Stats, CompensatedSumKeepsSmallTerms) {
  CompensatedSum s;
  s.add(1e16);
  s.add(1.0);
  s.add(-1e16);
  EXPECT_EQ(s.value(), 1.0);
}

TEST(Stats, QuantilesMatchTables) {
  EXPECT_NEAR(normal_quantile(0.975), 1.959963985, 1e-9);
  EXPECT_NEAR(student_t_quantile(0.975, 10), 2.228138852, 1e-9);
  EXPECT_NEAR(student_t_quantile(0.995, 4), 4.604094871, 1e-9);
  EXPECT_THROW(student_t_quantile(0.975, 0), Error);
}

TEST(Stats, TwoSidedPClosedForms) {
  // df = 1 is Cauchy, df = 2 has an algebraic CDF.
  for (double t : {0.0, 0.3, 1.0, 2.5, 12.0}) {
    EXPECT_NEAR(student_t_two_sided_p(t, 1), 1.0 - 2.0 / std::numbers::pi * std::atan(t), 1e-12);
    EXPECT_NEAR(student_t_two_sided_p(-t, 2), 1.0 - t / std::sqrt(2.0 + t * t), 1e-12);
  }
  // F(2, 2) has CDF x / (1 + x).
  for (double r : {0.1, 0.5, 0.9}) EXPECT_NEAR(f_two_sided_p(r, 2, 2), 2.0 * r / (1.0 + r), 1e-12);
  EXPECT_NEAR(f_two_sided_p(4.0, 2, 2), 2.0 * (1.0 - 4.0 / 5.0), 1e-12);
  EXPECT_NEAR(f_two_sided_p(0.3, 4, 7), f_two_sided_p(1.0 / 0.3, 7, 4), 1e-12);
}

TEST(Stats, WelchByHand) {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 4, 6, 8, 10, 12};
  const auto ma = moments(a), mb = moments(b);
  const double va = ma.var / 5, vb = mb.var / 6;
  const double se = std::sqrt(va + vb);
  const double df = (va + vb) * (va + vb) / (va * va / 4 + vb * vb / 5);

  const auto r = welch_t_test(a, b);
  EXPECT_NEAR(r.difference, -4.0, 1e-14);
  EXPECT_NEAR(r.se, se, 1e-14);
  EXPECT_NEAR(r.statistic, -4.0 / se, 1e-12);
  EXPECT_NEAR(r.df, df, 1e-12);
  EXPECT_NEAR(r.p_value, student_t_two_sided_p(-4.0 / se, df), 1e-14);
  EXPECT_GT(r.p_value, 0.04);
  EXPECT_LT(r.p_value, 0.06);
}

TEST(Stats, WelchIdenticalConstants) {
  const std::vector<double> a{3, 3, 3}, b{3, 3};
  const auto r = welch_t_test(a, b);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_THROW(welch_t_test(std::vector<double>{1.0}, b), Error);
}

TEST(Stats, VarianceRatioByHand) {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 4, 6, 8, 10, 12};
  const auto r = f_variance_test(a, b);
  EXPECT_NEAR(r.statistic, 2.5 / 14.0, 1e-14);
  EXPECT_NEAR(r.p_value, f_two_sided_p(2.5 / 14.0, 4, 5), 1e-14);
}

TEST(Stats, BrownForsytheByHand) {
  // Medians 3 and 7; absolute deviations below.
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 4, 6, 8, 10, 12};
  const std::vector<double> za{2, 1, 0, 1, 2}, zb{5, 3, 1, 1, 3, 5};
  const auto ma = moments(za), mb = moments(zb);
  const double pooled = (4 * ma.var + 5 * mb.var) / 9;
  const double t = (ma.mean - mb.mean) / std::sqrt(pooled * (1.0 / 5 + 1.0 / 6));

  const auto r = brown_forsythe_test(a, b);
  EXPECT_NEAR(r.statistic, t, 1e-12);
  EXPECT_EQ(r.df, 9.0);
  EXPECT_NEAR(r.p_value, student_t_two_sided_p(t, 9), 1e-14);

  // Shifting one sample changes the mean test but never the spread test.
  std::vector<double> shifted(b);
  for (auto& x : shifted) x += 100;
  EXPECT_NEAR(brown_forsythe_test(a, shifted).statistic, t, 1e-12);
}
