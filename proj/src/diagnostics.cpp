#include "absplit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include "absplit/assigner.hpp"
#include "absplit/hashing.hpp"
#include "absplit/pipeline.hpp"

namespace absplit {

namespace {

BudgetMoments moments(const std::vector<double>& budgets) {
  BudgetMoments m;
  m.count = static_cast<std::int64_t>(budgets.size());
  for (double b : budgets) m.total_minor += static_cast<std::int64_t>(b);
  m.mean = stats::mean(budgets);
  m.variance = stats::variance(budgets);
  return m;
}

BalanceStats compare(const std::vector<const AdCopy*>& copies, double significance, std::string segment) {
  std::vector<double> m1, m2;
  for (const auto* c : copies)
    (c->submarket == SubMarket::M1 ? m1 : m2).push_back(static_cast<double>(c->budget.minor()));
  BalanceStats s;
  s.segment = std::move(segment);
  s.m1 = moments(m1);
  s.m2 = moments(m2);
  if (m1.size() < 2 || m2.size() < 2) return s;  // too small to test
  s.mean_test = stats::welch_t_test(m1, m2);
  s.spread_test = stats::brown_forsythe_test(m1, m2);
  s.variance_ratio = stats::f_variance_test(m1, m2);
  s.passed = s.mean_test.p_value > significance / 2 && s.spread_test.p_value > significance / 2;
  return s;
}

std::int64_t pick_outcome(const MicroStats& s, InteractionKind kind) {
  switch (kind) {
    case InteractionKind::Impression: return s.impressions;
    case InteractionKind::Click: return s.clicks;
    case InteractionKind::Conversion: return s.conversions;
  }
  return 0;
}

bool closed_form(const SimConfig& sim) { return sim.response.form != ResponseForm::AuctionMicro; }

std::vector<std::int64_t> simulate_copy_outcomes(const Population& population, const std::vector<AdCopy>& copies,
                                                 const LatentIndex& latent, const SplitConfig& split,
                                                 const SimConfig& sim) {
  if (closed_form(sim)) return simulate_counts(copies, latent, sim);
  const auto users = assign_users(population.users, split);
  const auto micro = simulate_market_micro(copies, latent, users, sim);
  std::vector<std::int64_t> out;
  out.reserve(micro.per_copy.size());
  for (const auto& s : micro.per_copy) out.push_back(pick_outcome(s, sim.outcome_kind));
  return out;
}

template <typename Fn>
void parallel_for(std::int64_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, std::max<std::int64_t>(n, 1)));
  if (threads <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::int64_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

BalanceReport balance_test(const std::vector<AdCopy>& copies, double significance,
                           const std::optional<std::string>& segment_feature) {
  if (copies.empty()) fail(ErrorCode::InvalidArgument, "balance test needs at least one ad copy");
  if (!(significance > 0.0 && significance < 1.0))
    fail(ErrorCode::InvalidArgument, "significance must lie in (0, 1)");

  std::vector<const AdCopy*> all;
  all.reserve(copies.size());
  for (const auto& c : copies) all.push_back(&c);

  BalanceReport report;
  report.significance = significance;
  report.overall = compare(all, significance, "");
  if (report.overall.m1.count < 2 || report.overall.m2.count < 2)
    fail(ErrorCode::Data, "balance test needs at least two copies in each sub-market");
  report.passed = report.overall.passed;

  if (segment_feature) {
    std::map<std::string, std::vector<const AdCopy*>> groups;
    for (const auto* c : all) groups[std::string(c->features.get(*segment_feature).value_or(""))].push_back(c);
    for (const auto& [level, members] : groups)
      report.segments.push_back(compare(members, significance, *segment_feature + "=" + level));
  }
  return report;
}

std::vector<EstimationRow> simulate_estimation_rows(const Population& population, const SplitConfig& split,
                                                    const SimConfig& sim) {
  const auto copies = split_ads(population.ads, split);
  const auto latent = index_latent(population.latent);
  return to_estimation_rows(copies, simulate_copy_outcomes(population, copies, latent, split, sim));
}

PowerCurve power_analysis(const SimConfig& sim, const PowerOptions& options) {
  sim.validate();
  if (options.alphas.empty()) fail(ErrorCode::InvalidArgument, "power analysis needs at least one alpha");
  for (double a : options.alphas)
    if (!(a > 0.5 && a < 1.0))
      fail(ErrorCode::InvalidArgument, "power analysis alphas must lie in (0.5, 1); got " + std::to_string(a));
  if (options.replications < 50) fail(ErrorCode::InvalidArgument, "power analysis needs at least 50 replications");
  if (!(options.power > 0.0 && options.power < 1.0) || !(options.size > 0.0 && options.size < 1.0))
    fail(ErrorCode::InvalidArgument, "power and size must lie in (0, 1)");
  options.spec.validate();

  const auto n_alpha = options.alphas.size();
  const auto reps = options.replications;
  std::vector<double> rho(n_alpha * static_cast<std::size_t>(reps));
  std::vector<double> se(rho.size());

  parallel_for(reps, options.threads, [&](std::int64_t r) {
    SimConfig rep = sim;
    rep.seed = derive_seed(sim.seed, "absplit.power", static_cast<std::uint64_t>(r));
    const auto population = generate_population(rep);
    for (std::size_t a = 0; a < n_alpha; ++a) {
      SplitConfig split;
      split.alpha = options.alphas[a];
      split.seed = rep.seed;
      const auto rows = simulate_estimation_rows(population, split, rep);
      const auto est = estimate_incrementality(rows, options.spec);
      rho[a * static_cast<std::size_t>(reps) + static_cast<std::size_t>(r)] = est.rho;
      se[a * static_cast<std::size_t>(reps) + static_cast<std::size_t>(r)] = est.se;
    }
  });

  PowerCurve curve;
  curve.n_ads = sim.n_ads;
  curve.power = options.power;
  curve.size = options.size;
  const double z = stats::normal_quantile(1.0 - options.size / 2) + stats::normal_quantile(options.power);
  for (std::size_t a = 0; a < n_alpha; ++a) {
    const std::span<const double> rs(rho.data() + a * static_cast<std::size_t>(reps), static_cast<std::size_t>(reps));
    const std::span<const double> ss(se.data() + a * static_cast<std::size_t>(reps), static_cast<std::size_t>(reps));
    PowerPoint p;
    p.alpha = options.alphas[a];
    p.replications = reps;
    p.mean_rho = stats::mean(rs);
    p.monte_carlo_se = std::sqrt(stats::variance(rs));
    p.mean_reported_se = stats::mean(ss);
    p.detectable_effect = z * p.monte_carlo_se;
    curve.points.push_back(p);
  }
  return curve;
}

SideEffectReport side_effect_ab(const Population& population, double alpha1, const SplitConfig& split,
                                const SimConfig& sim) {
  sim.validate();
  // alpha1 = 0.5 gives an A/A comparison of two symmetric arms.
  if (!(alpha1 >= 0.5 && alpha1 < 1.0)) fail(ErrorCode::InvalidArgument, "alpha1 must lie in [0.5, 1)");
  if (population.ads.empty()) fail(ErrorCode::InvalidArgument, "side-effect test needs ads");

  std::vector<Ad> ads = population.ads;
  std::map<std::string_view, bool> in_arm_a;
  for (std::size_t i = 0; i < ads.size(); ++i) {
    const bool arm_a = hash_bit(stable_hash(split.namespaces.side_effect, split.seed, ads[i].ad_id));
    ads[i].alpha = arm_a ? alpha1 : 0.5;
    in_arm_a[population.ads[i].ad_id] = arm_a;
  }
  SplitConfig symmetric = split;
  symmetric.allow_symmetric = true;
  const auto copies = split_ads(ads, symmetric);
  const auto latent = index_latent(population.latent);
  const auto outcomes = simulate_copy_outcomes(population, copies, latent, symmetric, sim);

  SideEffectReport report;
  report.closed_form = closed_form(sim);
  std::vector<double> expected;
  if (report.closed_form) expected = expected_outcomes(copies, latent, sim);

  std::map<std::string_view, std::pair<double, double>> totals;  // realised, expected
  for (std::size_t k = 0; k < copies.size(); ++k) {
    auto& t = totals[copies[k].ad_id];
    t.first += static_cast<double>(outcomes[k]);
    if (report.closed_form) t.second += expected[k];
  }
  std::vector<double> a_tot, b_tot, a_exp, b_exp;
  for (const auto& [id, t] : totals) {
    const bool arm_a = in_arm_a.at(id);
    (arm_a ? a_tot : b_tot).push_back(t.first);
    (arm_a ? a_exp : b_exp).push_back(t.second);
  }
  if (a_tot.size() < 2 || b_tot.size() < 2) fail(ErrorCode::Data, "each arm needs at least two ads");

  auto fill = [&](SideEffectArm& arm, double alpha, const std::vector<double>& tot, const std::vector<double>& ex) {
    arm.alpha = alpha;
    arm.n_ads = static_cast<std::int64_t>(tot.size());
    arm.mean_total = stats::mean(tot);
    arm.variance_total = stats::variance(tot);
    arm.expected_mean_total = report.closed_form ? stats::mean(ex) : 0.0;
  };
  fill(report.asymmetric, alpha1, a_tot, a_exp);
  fill(report.symmetric, 0.5, b_tot, b_exp);
  report.test = stats::welch_t_test(a_tot, b_tot);
  report.expected_difference = report.asymmetric.expected_mean_total - report.symmetric.expected_mean_total;
  return report;
}

}  // namespace absplit
