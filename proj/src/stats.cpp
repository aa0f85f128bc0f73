#include "absplit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "absplit/types.hpp"

namespace absplit::stats {

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x))
    comp_ += (sum_ - t) + x;
  else
    comp_ += (x - t) + sum_;
  sum_ = t;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value() / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  CompensatedSum s;
  for (double x : xs) s.add((x - m) * (x - m));
  return s.value() / static_cast<double>(xs.size() - 1);
}

double correlation(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) fail(ErrorCode::InvalidArgument, "correlation: length mismatch");
  const double mx = mean(xs), my = mean(ys);
  CompensatedSum sxy, sxx, syy;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy.add(dx * dy);
    sxx.add(dx * dx);
    syy.add(dy * dy);
  }
  const double denom = std::sqrt(sxx.value() * syy.value());
  return denom > 0.0 ? sxy.value() / denom : 0.0;
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

double student_t_quantile(double p, double df) {
  if (!(df > 0.0)) fail(ErrorCode::Estimation, "t quantile needs positive degrees of freedom");
  return boost::math::quantile(boost::math::students_t(df), p);
}

double student_t_two_sided_p(double t, double df) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  if (!(df > 0.0)) return 1.0;
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(t)));
}

double f_two_sided_p(double ratio, double df1, double df2) {
  if (!(df1 > 0.0 && df2 > 0.0) || std::isnan(ratio)) return 1.0;
  if (std::isinf(ratio) || ratio == 0.0) return 0.0;
  const boost::math::fisher_f dist(df1, df2);
  const double lower = boost::math::cdf(dist, ratio);
  const double upper = boost::math::cdf(boost::math::complement(dist, ratio));
  return std::min(1.0, 2.0 * std::min(lower, upper));
}

TwoSampleTest welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) fail(ErrorCode::InvalidArgument, "welch_t_test: each sample needs >= 2 values");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = variance(a) / na, vb = variance(b) / nb;
  TwoSampleTest r;
  r.difference = mean(a) - mean(b);
  r.se = std::sqrt(va + vb);
  if (r.se == 0.0) {
    r.statistic = r.difference == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.difference);
    r.df = na + nb - 2.0;
    r.p_value = r.difference == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.statistic = r.difference / r.se;
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.p_value = student_t_two_sided_p(r.statistic, r.df);
  return r;
}

TwoSampleTest f_variance_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) fail(ErrorCode::InvalidArgument, "f_variance_test: each sample needs >= 2 values");
  const double va = variance(a), vb = variance(b);
  TwoSampleTest r;
  r.difference = va - vb;
  r.df = static_cast<double>(a.size() - 1);
  if (va == vb) {
    r.statistic = 1.0;
    r.p_value = 1.0;
    return r;
  }
  r.statistic = vb > 0.0 ? va / vb : std::numeric_limits<double>::infinity();
  r.p_value = f_two_sided_p(r.statistic, static_cast<double>(a.size() - 1), static_cast<double>(b.size() - 1));
  return r;
}

namespace {

double median(std::vector<double> xs) {
  const std::size_t n = xs.size();
  std::nth_element(xs.begin(), xs.begin() + n / 2, xs.end());
  const double upper = xs[n / 2];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(xs.begin(), xs.begin() + n / 2);
  return 0.5 * (lower + upper);
}

std::vector<double> abs_deviation(std::span<const double> xs) {
  const double m = median(std::vector<double>(xs.begin(), xs.end()));
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(), [m](double x) { return std::abs(x - m); });
  return out;
}

}  // namespace

TwoSampleTest brown_forsythe_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    fail(ErrorCode::InvalidArgument, "brown_forsythe_test: each sample needs >= 2 values");
  const auto za = abs_deviation(a), zb = abs_deviation(b);
  const double na = static_cast<double>(za.size()), nb = static_cast<double>(zb.size());
  const double pooled = ((na - 1.0) * variance(za) + (nb - 1.0) * variance(zb)) / (na + nb - 2.0);
  TwoSampleTest r;
  r.difference = mean(za) - mean(zb);
  r.se = std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  r.df = na + nb - 2.0;
  if (r.se == 0.0) {
    r.statistic = r.difference == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.difference);
    r.p_value = r.difference == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.statistic = r.difference / r.se;
  r.p_value = student_t_two_sided_p(r.statistic, r.df);
  return r;
}

}  // namespace absplit::stats
