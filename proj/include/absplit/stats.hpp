#pragma once

#include <cstddef>
#include <span>

namespace absplit::stats {

// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double mean(std::span<const double> xs);
// Sample variance (n - 1 denominator); 0 for fewer than two values.
double variance(std::span<const double> xs);
double correlation(std::span<const double> xs, std::span<const double> ys);

double normal_quantile(double p);
double student_t_quantile(double p, double df);
// Two-sided p-value of a t statistic; df may be fractional.
double student_t_two_sided_p(double t, double df);
double f_two_sided_p(double ratio, double df1, double df2);

struct TwoSampleTest {
  double difference = 0.0;  // mean(a) - mean(b)
  double se = 0.0;
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

// Welch's unequal-variance t test:
//   se^2 = s_a^2 / n_a + s_b^2 / n_b,  t = (mean_a - mean_b) / se,
//   df = se^4 / ((s_a^2/n_a)^2/(n_a-1) + (s_b^2/n_b)^2/(n_b-1)).
// Identical constant samples give t = 0, p = 1.
TwoSampleTest welch_t_test(std::span<const double> a, std::span<const double> b);

// Classical variance-ratio test, F = s_a^2 / s_b^2 on (n_a-1, n_b-1) df.
TwoSampleTest f_variance_test(std::span<const double> a, std::span<const double> b);

// Brown-Forsythe test for equal spread: pooled two-sample t test (the
// two-group Levene ANOVA) on absolute deviations from each sample's median.
TwoSampleTest brown_forsythe_test(std::span<const double> a, std::span<const double> b);

}  // namespace absplit::stats
