#include "absplit/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "absplit/stats.hpp"

namespace absplit {

void RegressionSpec::validate() const {
  if (use_fixed_effects && !control_features.empty())
    fail(ErrorCode::InvalidArgument, "fixed effects and control features are mutually exclusive "
                                     "(controls are absorbed by the ad fixed effects)");
  if (!(confidence_level > 0.0 && confidence_level < 1.0))
    fail(ErrorCode::InvalidArgument, "confidence level must lie in (0, 1)");
}

PairedSample pair_rows(std::span<const EstimationRow> rows, std::span<const double> outcomes) {
  if (!outcomes.empty() && outcomes.size() != rows.size())
    fail(ErrorCode::InvalidArgument, "outcome override length differs from the number of rows");

  struct Slots {
    std::ptrdiff_t high = -1, low = -1;
    int high_count = 0, low_count = 0;
  };
  std::map<std::string_view, Slots> by_ad;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto& s = by_ad[rows[k].ad_id];
    if (rows[k].copy_type == CopyType::High) {
      s.high = static_cast<std::ptrdiff_t>(k);
      ++s.high_count;
    } else {
      s.low = static_cast<std::ptrdiff_t>(k);
      ++s.low_count;
    }
  }

  PairedSample sample;
  sample.pairs.reserve(by_ad.size());
  for (const auto& [id, s] : by_ad) {
    if (s.high_count != 1 || s.low_count != 1)
      fail(ErrorCode::Data, "ad '" + std::string(id) + "' must have exactly one high and one low copy");
    const auto& high = rows[static_cast<std::size_t>(s.high)];
    const auto& low = rows[static_cast<std::size_t>(s.low)];
    if (high.submarket == low.submarket)
      fail(ErrorCode::Data, "ad '" + std::string(id) + "' has both copies in the same sub-market");
    const std::int64_t total = high.budget.minor() + low.budget.minor();
    const std::int64_t half = half_up(total);
    if (high.rand_b.minor != high.budget.minor() - half || low.rand_b.minor != low.budget.minor() - half)
      fail(ErrorCode::Data, "ad '" + std::string(id) + "': rand_b inconsistent with copy budgets");
    if (high.budget == low.budget) {
      ++sample.excluded_ads;
      continue;
    }
    PairedSample::Pair p;
    p.high = &high;
    p.low = &low;
    p.y_high = outcomes.empty() ? static_cast<double>(high.outcome) : outcomes[static_cast<std::size_t>(s.high)];
    p.y_low = outcomes.empty() ? static_cast<double>(low.outcome) : outcomes[static_cast<std::size_t>(s.low)];
    const double half_total = 0.5 * static_cast<double>(total);
    p.rand_b_high = static_cast<double>(high.budget.minor()) - half_total;
    p.rand_b_low = static_cast<double>(low.budget.minor()) - half_total;
    sample.pairs.push_back(p);
  }

  const auto included = static_cast<std::int64_t>(sample.pairs.size());
  if (included == 0) fail(ErrorCode::Estimation, "no ad has RandB variation (all rand_b are zero)");
  if (2 * sample.excluded_ads > included + sample.excluded_ads)
    fail(ErrorCode::Estimation, "more than half of the ads have zero RandB (" + std::to_string(sample.excluded_ads) +
                                    " of " + std::to_string(included + sample.excluded_ads) + ")");
  if (included < 3) fail(ErrorCode::Estimation, "at least 3 ads (clusters) with RandB variation are required");
  return sample;
}

namespace {

struct ControlColumns {
  std::vector<std::string> names;
  std::vector<std::pair<std::string, std::string>> levels;  // (feature, level) per column
};

ControlColumns expand_controls(const PairedSample& sample, const std::vector<std::string>& features) {
  ControlColumns out;
  for (const auto& feature : features) {
    std::map<std::string, std::int64_t> freq;
    for (const auto& p : sample.pairs) {
      const auto v = p.high->features.get(feature);
      if (!v) fail(ErrorCode::Data, "control feature '" + feature + "' missing for ad '" + p.high->ad_id + "'");
      ++freq[std::string(*v)];
    }
    // Drop the most frequent level; ties go to the lexicographically first.
    auto base = freq.begin();
    for (auto it = freq.begin(); it != freq.end(); ++it)
      if (it->second > base->second) base = it;
    for (const auto& [level, n] : freq) {
      if (level == base->first) continue;
      out.names.push_back(feature + "=" + level);
      out.levels.emplace_back(feature, level);
    }
  }
  return out;
}

double pair_weight(double w_high, double w_low) { return w_high * w_low / (w_high + w_low); }

// Fixed effects: one differenced row per ad. Pooled: two rows per ad with an intercept.
DesignMatrix build_design(const PairedSample& sample, const RegressionSpec& spec, bool lift) {
  spec.validate();
  const auto g = static_cast<Eigen::Index>(sample.pairs.size());
  DesignMatrix d;

  if (spec.use_fixed_effects) {
    // Within an ad the difference of RandB*m is always half the difference of
    // RandB, so the interaction cannot be separated from the slope.
    if (lift)
      fail(ErrorCode::InvalidArgument,
           "lift model is not identified with ad fixed effects: RandB*m is collinear with RandB within ads");
    d.column_names = {"rand_b"};
    d.x.resize(g, 1);
    d.y.resize(g);
    d.w.resize(g);
    d.cluster.resize(static_cast<std::size_t>(g));
    for (Eigen::Index i = 0; i < g; ++i) {
      const auto& pr = sample.pairs[static_cast<std::size_t>(i)];
      d.y[i] = pr.y_high - pr.y_low;
      d.x(i, 0) = pr.rand_b_high - pr.rand_b_low;
      d.w[i] = spec.use_weights
                   ? pair_weight(1.0 / (pr.rand_b_high * pr.rand_b_high), 1.0 / (pr.rand_b_low * pr.rand_b_low))
                   : 0.5;
      d.cluster[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i);
    }
    return d;
  }

  const auto controls = expand_controls(sample, spec.control_features);
  d.column_names = lift ? std::vector<std::string>{"cons", "m", "rand_b", "rand_b_x_m"}
                        : std::vector<std::string>{"cons", "rand_b"};
  const auto base_cols = static_cast<Eigen::Index>(d.column_names.size());
  d.column_names.insert(d.column_names.end(), controls.names.begin(), controls.names.end());
  const auto p = static_cast<Eigen::Index>(d.column_names.size());
  const Eigen::Index n = 2 * g;
  d.x = Eigen::MatrixXd::Zero(n, p);
  d.y.resize(n);
  d.w.resize(n);
  d.cluster.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < g; ++i) {
    const auto& pr = sample.pairs[static_cast<std::size_t>(i)];
    for (int side = 0; side < 2; ++side) {
      const Eigen::Index k = 2 * i + side;
      const EstimationRow& row = side == 0 ? *pr.high : *pr.low;
      const double r = side == 0 ? pr.rand_b_high : pr.rand_b_low;
      const double m = row.treatment();
      d.y[k] = side == 0 ? pr.y_high : pr.y_low;
      d.x(k, 0) = 1.0;
      if (lift) {
        d.x(k, 1) = m;
        d.x(k, 2) = r;
        d.x(k, 3) = r * m;
      } else {
        d.x(k, 1) = r;
      }
      for (std::size_t c = 0; c < controls.levels.size(); ++c) {
        const auto& [feature, level] = controls.levels[c];
        if (pr.high->features.get(feature) == std::optional<std::string_view>(level))
          d.x(k, base_cols + static_cast<Eigen::Index>(c)) = 1.0;
      }
      d.w[k] = spec.use_weights ? 1.0 / (r * r) : 1.0;
      d.cluster[static_cast<std::size_t>(k)] = static_cast<std::size_t>(i);
    }
  }
  return d;
}

struct Fitted {
  DesignMatrix design;
  WlsFit fit;
  Eigen::MatrixXd cov;
  double t_crit = 0.0;
  double df = 0.0;
};

Fitted fit_design(DesignMatrix design, const PairedSample& sample, const RegressionSpec& spec) {
  Fitted f;
  f.fit = wls_fit(design);
  std::optional<SmallSampleCounts> counts;
  if (spec.use_fixed_effects) {
    // Ad effects are nested within the ad clusters and are not counted in K.
    counts = SmallSampleCounts{2.0 * static_cast<double>(sample.pairs.size()), static_cast<double>(design.cols())};
  }
  f.cov = cluster_robust_covariance(design, f.fit, counts);
  f.df = static_cast<double>(sample.pairs.size()) - 1.0;
  f.t_crit = stats::student_t_quantile(0.5 + 0.5 * spec.confidence_level, f.df);
  f.design = std::move(design);
  return f;
}

Eigen::Index column_index(const DesignMatrix& d, std::string_view name) {
  for (std::size_t j = 0; j < d.column_names.size(); ++j)
    if (d.column_names[j] == name) return static_cast<Eigen::Index>(j);
  fail(ErrorCode::InvalidArgument, "design has no column " + std::string(name));
}

CoefficientEstimate coefficient(const Fitted& f, std::string_view name) {
  const auto j = column_index(f.design, name);
  CoefficientEstimate c;
  c.value = f.fit.coefficients[j];
  c.se = std::sqrt(std::max(0.0, f.cov(j, j)));
  c.ci_low = c.value - f.t_crit * c.se;
  c.ci_high = c.value + f.t_crit * c.se;
  if (c.se > 0.0)
    c.t_stat = c.value / c.se;
  else
    c.t_stat = c.value == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), c.value);
  c.p_value = stats::student_t_two_sided_p(c.t_stat, f.df);
  return c;
}

std::vector<std::string_view> segment_levels(std::span<const EstimationRow> rows, const std::string& feature) {
  std::vector<std::string_view> levels;
  for (const auto& r : rows) levels.push_back(r.features.get(feature).value_or(""));
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

template <typename Estimate, typename Fn>
std::vector<Estimate> by_segment(std::span<const EstimationRow> rows, const std::string& feature, Fn&& fit) {
  std::vector<Estimate> out;
  for (const auto level : segment_levels(rows, feature)) {
    std::vector<EstimationRow> subset;
    for (const auto& r : rows)
      if (r.features.get(feature).value_or("") == level) subset.push_back(r);
    const std::string label = feature + "=" + std::string(level);
    try {
      Estimate e = fit(std::span<const EstimationRow>(subset));
      e.segment = label;
      out.push_back(std::move(e));
    } catch (const Error& e) {
      fail(e.code(), "segment " + label + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

DesignMatrix incrementality_design(const PairedSample& sample, const RegressionSpec& spec) {
  return build_design(sample, spec, false);
}

DesignMatrix lift_design(const PairedSample& sample, const RegressionSpec& spec) {
  return build_design(sample, spec, true);
}

IncrementalityEstimate estimate_incrementality(std::span<const EstimationRow> rows, const RegressionSpec& spec,
                                               std::span<const double> outcomes) {
  spec.validate();
  const auto sample = pair_rows(rows, outcomes);
  const auto f = fit_design(incrementality_design(sample, spec), sample, spec);
  const auto rho = coefficient(f, "rand_b");

  IncrementalityEstimate e;
  e.rho = rho.value;
  e.se = rho.se;
  e.ci_low = rho.ci_low;
  e.ci_high = rho.ci_high;
  e.t_stat = rho.t_stat;
  e.p_value = rho.p_value;
  e.confidence_level = spec.confidence_level;
  e.n_ads = static_cast<std::int64_t>(sample.pairs.size());
  e.n_rows = 2 * e.n_ads;
  e.n_excluded_ads = sample.excluded_ads;
  e.used_fixed_effects = spec.use_fixed_effects;
  e.used_weights = spec.use_weights;
  e.control_features = spec.control_features;
  return e;
}

LiftEstimate estimate_lift(std::span<const EstimationRow> rows, const RegressionSpec& spec,
                           std::span<const double> outcomes) {
  spec.validate();
  const auto sample = pair_rows(rows, outcomes);
  const bool varies = std::any_of(sample.pairs.begin(), sample.pairs.end(), [&](const auto& p) {
    return p.high->treatment() != sample.pairs.front().high->treatment() || p.low->treatment() != p.high->treatment();
  });
  if (!varies) fail(ErrorCode::Estimation, "treatment indicator m is constant");
  const auto f = fit_design(lift_design(sample, spec), sample, spec);

  LiftEstimate e;
  e.rho = coefficient(f, "rand_b");
  e.mu = coefficient(f, "m");
  e.delta_rho = coefficient(f, "rand_b_x_m");
  e.confidence_level = spec.confidence_level;
  e.n_ads = static_cast<std::int64_t>(sample.pairs.size());
  e.n_rows = 2 * e.n_ads;
  e.n_excluded_ads = sample.excluded_ads;
  e.used_fixed_effects = spec.use_fixed_effects;
  e.used_weights = spec.use_weights;
  e.control_features = spec.control_features;
  return e;
}

std::vector<IncrementalityEstimate> estimate_incrementality_by_segment(std::span<const EstimationRow> rows,
                                                                       const RegressionSpec& spec,
                                                                       const std::string& segment_feature) {
  return by_segment<IncrementalityEstimate>(
      rows, segment_feature, [&](std::span<const EstimationRow> s) { return estimate_incrementality(s, spec); });
}

std::vector<LiftEstimate> estimate_lift_by_segment(std::span<const EstimationRow> rows, const RegressionSpec& spec,
                                                   const std::string& segment_feature) {
  return by_segment<LiftEstimate>(rows, segment_feature,
                                  [&](std::span<const EstimationRow> s) { return estimate_lift(s, spec); });
}

IncrementalityEstimate estimate_naive_budget_slope(std::span<const EstimationRow> rows,
                                                   std::span<const double> outcomes, double confidence_level) {
  if (!outcomes.empty() && outcomes.size() != rows.size())
    fail(ErrorCode::InvalidArgument, "outcome override length differs from the number of rows");
  std::map<std::string_view, std::pair<double, std::int64_t>> totals;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto& t = totals[rows[k].ad_id];
    t.first += outcomes.empty() ? static_cast<double>(rows[k].outcome) : outcomes[k];
    t.second += rows[k].budget.minor();
  }
  const auto g = static_cast<Eigen::Index>(totals.size());
  if (g < 3) fail(ErrorCode::Estimation, "at least 3 ads are required");
  DesignMatrix d;
  d.column_names = {"cons", "budget"};
  d.x.resize(g, 2);
  d.y.resize(g);
  d.w = Eigen::VectorXd::Ones(g);
  d.cluster.resize(static_cast<std::size_t>(g));
  Eigen::Index i = 0;
  for (const auto& [id, t] : totals) {
    d.x(i, 0) = 1.0;
    d.x(i, 1) = static_cast<double>(t.second);
    d.y[i] = t.first;
    d.cluster[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i);
    ++i;
  }
  const auto fit = wls_fit(d);
  const auto cov = cluster_robust_covariance(d, fit);
  const double t_crit = stats::student_t_quantile(0.5 + 0.5 * confidence_level, static_cast<double>(g - 1));

  IncrementalityEstimate e;
  e.rho = fit.coefficients[1];
  e.se = std::sqrt(std::max(0.0, cov(1, 1)));
  e.ci_low = e.rho - t_crit * e.se;
  e.ci_high = e.rho + t_crit * e.se;
  e.t_stat = e.se > 0.0 ? e.rho / e.se : 0.0;
  e.p_value = stats::student_t_two_sided_p(e.t_stat, static_cast<double>(g - 1));
  e.confidence_level = confidence_level;
  e.n_ads = g;
  e.n_rows = static_cast<std::int64_t>(rows.size());
  e.used_weights = false;
  return e;
}

std::vector<ForecastPoint> forecast_performance(const IncrementalityEstimate& estimate, const ForecastBaseline& baseline,
                                                const std::vector<std::int64_t>& budget_levels) {
  if (baseline.budget_minor < 0) fail(ErrorCode::InvalidArgument, "baseline budget must be >= 0");
  const double df = static_cast<double>(std::max<std::int64_t>(estimate.n_ads - 1, 1));
  const double t_crit = stats::student_t_quantile(0.5 + 0.5 * estimate.confidence_level, df);
  std::vector<ForecastPoint> out;
  out.reserve(budget_levels.size());
  for (const auto level : budget_levels) {
    if (level < 0) fail(ErrorCode::InvalidArgument, "negative budget level " + std::to_string(level));
    const double delta = static_cast<double>(level - baseline.budget_minor);
    const double y = baseline.expected_outcome + estimate.rho * delta;
    const double half_width = t_crit * estimate.se * std::abs(delta);
    out.push_back(ForecastPoint{level, y, y - half_width, y + half_width});
  }
  return out;
}

ForecastBaseline baseline_for_ad(std::span<const EstimationRow> rows, const std::string& ad_id, double rho) {
  const EstimationRow* high = nullptr;
  const EstimationRow* low = nullptr;
  for (const auto& r : rows) {
    if (r.ad_id != ad_id) continue;
    (r.copy_type == CopyType::High ? high : low) = &r;
  }
  if (!high || !low) fail(ErrorCode::Data, "ad '" + ad_id + "' not found with both copies");
  const double total = static_cast<double>(high->budget.minor() + low->budget.minor());
  const double rand_b_high = static_cast<double>(high->budget.minor()) - 0.5 * total;
  return ForecastBaseline{high->budget.minor(),
                          0.5 * static_cast<double>(high->outcome + low->outcome) + rho * rand_b_high};
}

}  // namespace absplit
