#include "absplit/workflow.hpp"

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "absplit/assigner.hpp"
#include "absplit/csv.hpp"

namespace absplit::workflow {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string printf_string(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string printf_string(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  va_list copy;
  va_copy(copy, args);
  const int n = std::vsnprintf(nullptr, 0, fmt, copy);
  va_end(copy);
  std::string out(static_cast<std::size_t>(n), '\0');
  std::vsnprintf(out.data(), out.size() + 1, fmt, args);
  va_end(args);
  return out;
}

// Strict reader over one JSON object.
class Fields {
 public:
  Fields(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j.is_object()) fail(ErrorCode::InvalidArgument, context_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::InvalidArgument, context_ + ": bad value for '" + key + "'");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(ErrorCode::InvalidArgument, context_ + ": unknown key '" + key + "'");
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

AuctionParams auction_from_json(const json& j) {
  AuctionParams a;
  Fields f(j, "auction");
  f.get("arrivals_per_user", a.arrivals_per_user);
  f.get("horizon_ms", a.horizon_ms);
  f.get("value_log_mean", a.value_log_mean);
  f.get("value_log_sigma", a.value_log_sigma);
  f.get("bid_noise_sigma", a.bid_noise_sigma);
  f.get("reserve_minor", a.reserve_minor);
  f.get("click_rate", a.click_rate);
  f.get("conversion_rate", a.conversion_rate);
  std::string pacing = a.pacing == Pacing::Even ? "even" : "none";
  f.get("pacing", pacing);
  if (pacing == "even")
    a.pacing = Pacing::Even;
  else if (pacing == "none")
    a.pacing = Pacing::None;
  else
    fail(ErrorCode::InvalidArgument, "auction: unknown pacing '" + pacing + "'");
  f.finish();
  return a;
}

ResponseModel response_from_json(const json& j, const std::string& context) {
  ResponseModel r;
  Fields f(j, context);
  std::string form(to_string(r.form)), noise(to_string(r.noise));
  f.get("form", form);
  f.get("noise", noise);
  r.form = parse_response_form(form);
  r.noise = parse_noise_kind(noise);
  f.get("base", r.base);
  f.get("slope", r.slope);
  f.get("scale", r.scale);
  f.get("exponent", r.exponent);
  f.get("max_level", r.max_level);
  f.get("half_saturation", r.half_saturation);
  f.get("noise_sigma", r.noise_sigma);
  if (const auto* a = f.child("auction")) r.auction = auction_from_json(*a);
  f.finish();
  return r;
}

ordered_json response_to_json(const ResponseModel& r) {
  ordered_json j;
  j["form"] = to_string(r.form);
  j["base"] = r.base;
  j["slope"] = r.slope;
  j["scale"] = r.scale;
  j["exponent"] = r.exponent;
  j["max_level"] = r.max_level;
  j["half_saturation"] = r.half_saturation;
  j["noise"] = to_string(r.noise);
  j["noise_sigma"] = r.noise_sigma;
  const auto& a = r.auction;
  j["auction"] = ordered_json{{"arrivals_per_user", a.arrivals_per_user},
                              {"horizon_ms", a.horizon_ms},
                              {"value_log_mean", a.value_log_mean},
                              {"value_log_sigma", a.value_log_sigma},
                              {"bid_noise_sigma", a.bid_noise_sigma},
                              {"reserve_minor", a.reserve_minor},
                              {"click_rate", a.click_rate},
                              {"conversion_rate", a.conversion_rate},
                              {"pacing", a.pacing == Pacing::Even ? "even" : "none"}};
  return j;
}

ordered_json coefficient_json(const CoefficientEstimate& c) {
  return ordered_json{{"value", c.value},     {"se", c.se},           {"ci_low", c.ci_low},
                      {"ci_high", c.ci_high}, {"t_stat", c.t_stat},   {"p_value", c.p_value}};
}

ordered_json test_json(const stats::TwoSampleTest& t) {
  return ordered_json{{"difference", t.difference}, {"se", t.se},   {"statistic", t.statistic},
                      {"df", t.df},                 {"p_value", t.p_value}};
}

ordered_json moments_json(const BudgetMoments& m) {
  return ordered_json{{"count", m.count}, {"total_minor", m.total_minor}, {"mean", m.mean}, {"variance", m.variance}};
}

ordered_json balance_stats_json(const BalanceStats& s) {
  ordered_json j;
  j["segment"] = s.segment;
  j["m1"] = moments_json(s.m1);
  j["m2"] = moments_json(s.m2);
  j["mean_test"] = test_json(s.mean_test);
  j["spread_test"] = test_json(s.spread_test);
  j["variance_ratio"] = test_json(s.variance_ratio);
  j["passed"] = s.passed;
  return j;
}

double number_or_nan(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) fail(ErrorCode::Parse, std::string("result record lacks '") + key + "'");
  if (it->is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!it->is_number()) fail(ErrorCode::Parse, std::string("result field '") + key + "' is not a number");
  return it->get<double>();
}

std::string estimate_line(const IncrementalityEstimate& e, const char* label) {
  const std::string seg = e.segment.empty() ? "all" : e.segment;
  return printf_string("%-22s %-24s %14.6g %12.4g [%12.6g, %12.6g] %9.3f %10.4g %8lld\n", label, seg.c_str(), e.rho,
                       e.se, e.ci_low, e.ci_high, e.t_stat, e.p_value, static_cast<long long>(e.n_ads));
}

std::string estimate_header() {
  return printf_string("%-22s %-24s %14s %12s %29s %9s %10s %8s\n", "estimate", "segment", "rho", "se", "ci",
                       "t", "p", "ads");
}

void add_line(std::string& out, const ordered_json& j) {
  out += j.dump();
  out += '\n';
}

void write_text(const std::string& path, const std::string& text) {
  auto out = csv::open_output(path);
  out << text;
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
}

LatentIndex load_latent(const std::string& path) {
  if (path.empty()) return {};
  return index_latent(read_latent(path));
}

}  // namespace

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir.empty() ? "." : dir) / name).string();
}

SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  Fields f(j, "simulation config");
  if (const auto* r = f.child("response")) c.response = response_from_json(*r, "response");
  if (const auto* t = f.child("treatment"); t && !t->is_null()) c.treatment = response_from_json(*t, "treatment");
  f.get("n_users", c.n_users);
  f.get("n_ads", c.n_ads);
  f.get("seed", c.seed);
  f.get("confounding_strength", c.confounding_strength);
  f.get("quality_sigma", c.quality_sigma);
  f.get("segment_feature", c.segment_feature);
  std::string outcome(to_string(c.outcome_kind));
  f.get("outcome_kind", outcome);
  c.outcome_kind = parse_interaction_kind(outcome);
  if (const auto* b = f.child("budget")) {
    Fields bf(*b, "budget");
    std::string kind = "lognormal", file;
    bf.get("kind", kind);
    bf.get("log_mean", c.budget.log_mean);
    bf.get("log_sigma", c.budget.log_sigma);
    bf.get("fixed_minor", c.budget.fixed_minor);
    bf.get("file", file);
    bf.finish();
    if (kind == "lognormal") {
      c.budget.kind = BudgetDistribution::Kind::LogNormal;
    } else if (kind == "fixed") {
      c.budget.kind = BudgetDistribution::Kind::Fixed;
    } else if (kind == "empirical") {
      if (file.empty()) fail(ErrorCode::InvalidArgument, "empirical budget distribution needs 'file'");
      const auto loaded = BudgetDistribution::from_file(file);
      c.budget.kind = loaded.kind;
      c.budget.empirical = loaded.empirical;
    } else {
      fail(ErrorCode::InvalidArgument, "budget: unknown kind '" + kind + "'");
    }
  }
  if (const auto* s = f.child("segments")) {
    if (!s->is_array()) fail(ErrorCode::InvalidArgument, "segments must be an array");
    for (const auto& item : *s) {
      SegmentLevel level;
      Fields sf(item, "segment");
      sf.get("level", level.level);
      sf.get("weight", level.weight);
      sf.get("multiplier", level.multiplier);
      sf.finish();
      c.segments.push_back(level);
    }
  }
  f.finish();
  c.validate();
  return c;
}

ordered_json to_json(const SimConfig& c) {
  ordered_json j;
  j["response"] = response_to_json(c.response);
  j["treatment"] = c.treatment ? response_to_json(*c.treatment) : ordered_json(nullptr);
  j["n_users"] = c.n_users;
  j["n_ads"] = c.n_ads;
  j["seed"] = c.seed;
  j["confounding_strength"] = c.confounding_strength;
  j["quality_sigma"] = c.quality_sigma;
  j["segment_feature"] = c.segment_feature;
  j["outcome_kind"] = to_string(c.outcome_kind);
  ordered_json b;
  switch (c.budget.kind) {
    case BudgetDistribution::Kind::LogNormal:
      b = {{"kind", "lognormal"}, {"log_mean", c.budget.log_mean}, {"log_sigma", c.budget.log_sigma}};
      break;
    case BudgetDistribution::Kind::Fixed:
      b = {{"kind", "fixed"}, {"fixed_minor", c.budget.fixed_minor}};
      break;
    case BudgetDistribution::Kind::Empirical:
      b = {{"kind", "empirical"}, {"size", c.budget.empirical.size()}};
      break;
  }
  j["budget"] = b;
  ordered_json segs = ordered_json::array();
  for (const auto& s : c.segments) segs.push_back({{"level", s.level}, {"weight", s.weight}, {"multiplier", s.multiplier}});
  j["segments"] = segs;
  return j;
}

EstimateOptions estimate_options_from_json(const json& j) {
  EstimateOptions o;
  Fields f(j, "estimation spec");
  f.get("fixed_effects", o.spec.use_fixed_effects);
  f.get("controls", o.spec.control_features);
  f.get("weights", o.spec.use_weights);
  f.get("confidence_level", o.spec.confidence_level);
  std::string segment;
  f.get("segment_by", segment);
  if (!segment.empty()) o.segment_by = segment;
  f.get("naive", o.naive);
  f.finish();
  o.spec.validate();
  return o;
}

PowerOptions power_options_from_json(const json& j) {
  PowerOptions o;
  Fields f(j, "power options");
  f.get("alphas", o.alphas);
  f.get("replications", o.replications);
  f.get("power", o.power);
  f.get("size", o.size);
  f.get("threads", o.threads);
  f.get("fixed_effects", o.spec.use_fixed_effects);
  f.get("weights", o.spec.use_weights);
  f.finish();
  return o;
}

ordered_json to_json(const IncrementalityEstimate& e, std::string_view type) {
  ordered_json j;
  j["type"] = type;
  j["segment"] = e.segment;
  j["rho"] = e.rho;
  j["se"] = e.se;
  j["ci_low"] = e.ci_low;
  j["ci_high"] = e.ci_high;
  j["t_stat"] = e.t_stat;
  j["p_value"] = e.p_value;
  j["confidence_level"] = e.confidence_level;
  j["n_ads"] = e.n_ads;
  j["n_rows"] = e.n_rows;
  j["n_excluded_ads"] = e.n_excluded_ads;
  j["fixed_effects"] = e.used_fixed_effects;
  j["weights"] = e.used_weights;
  j["controls"] = e.control_features;
  return j;
}

ordered_json to_json(const LiftEstimate& e) {
  ordered_json j;
  j["type"] = "lift";
  j["segment"] = e.segment;
  j["rho"] = coefficient_json(e.rho);
  j["mu"] = coefficient_json(e.mu);
  j["delta_rho"] = coefficient_json(e.delta_rho);
  j["confidence_level"] = e.confidence_level;
  j["n_ads"] = e.n_ads;
  j["n_rows"] = e.n_rows;
  j["n_excluded_ads"] = e.n_excluded_ads;
  j["fixed_effects"] = e.used_fixed_effects;
  j["weights"] = e.used_weights;
  j["controls"] = e.control_features;
  return j;
}

ordered_json to_json(const BalanceReport& r) {
  ordered_json j;
  j["type"] = "balance";
  j["significance"] = r.significance;
  j["passed"] = r.passed;
  j["overall"] = balance_stats_json(r.overall);
  ordered_json segs = ordered_json::array();
  for (const auto& s : r.segments) segs.push_back(balance_stats_json(s));
  j["segments"] = segs;
  return j;
}

ordered_json to_json(const PowerCurve& c) {
  ordered_json j;
  j["type"] = "power";
  j["n_ads"] = c.n_ads;
  j["power"] = c.power;
  j["size"] = c.size;
  ordered_json pts = ordered_json::array();
  for (const auto& p : c.points)
    pts.push_back({{"alpha", p.alpha},
                   {"replications", p.replications},
                   {"mean_rho", p.mean_rho},
                   {"monte_carlo_se", p.monte_carlo_se},
                   {"mean_reported_se", p.mean_reported_se},
                   {"detectable_effect", p.detectable_effect}});
  j["points"] = pts;
  return j;
}

ordered_json to_json(const SideEffectReport& r) {
  auto arm = [](const SideEffectArm& a) {
    return ordered_json{{"alpha", a.alpha},
                        {"n_ads", a.n_ads},
                        {"mean_total", a.mean_total},
                        {"variance_total", a.variance_total},
                        {"expected_mean_total", a.expected_mean_total}};
  };
  ordered_json j;
  j["type"] = "side_effect";
  j["asymmetric"] = arm(r.asymmetric);
  j["symmetric"] = arm(r.symmetric);
  j["test"] = test_json(r.test);
  j["expected_difference"] = r.closed_form ? ordered_json(r.expected_difference) : ordered_json(nullptr);
  return j;
}

ordered_json to_json(const BuildStats& s) {
  return ordered_json{{"type", "build"},
                      {"interactions_read", s.interactions_read},
                      {"interactions_counted", s.interactions_counted},
                      {"other_kind", s.other_kind},
                      {"orphan_users", s.orphan_users},
                      {"orphan_ads", s.orphan_ads}};
}

IncrementalityEstimate incrementality_from_json(const json& j) {
  if (!j.is_object() || j.value("type", "") != "incrementality")
    fail(ErrorCode::Parse, "not an incrementality result record");
  IncrementalityEstimate e;
  try {
    e.segment = j.value("segment", "");
    e.rho = number_or_nan(j, "rho");
    e.se = number_or_nan(j, "se");
    e.ci_low = number_or_nan(j, "ci_low");
    e.ci_high = number_or_nan(j, "ci_high");
    e.t_stat = number_or_nan(j, "t_stat");
    e.p_value = number_or_nan(j, "p_value");
    e.confidence_level = number_or_nan(j, "confidence_level");
    e.n_ads = j.at("n_ads").get<std::int64_t>();
    e.n_rows = j.value("n_rows", std::int64_t{0});
    e.n_excluded_ads = j.value("n_excluded_ads", std::int64_t{0});
    e.used_fixed_effects = j.value("fixed_effects", false);
    e.used_weights = j.value("weights", true);
    e.control_features = j.value("controls", std::vector<std::string>{});
  } catch (const json::exception& ex) {
    fail(ErrorCode::Parse, std::string("malformed incrementality record: ") + ex.what());
  }
  return e;
}

IncrementalityEstimate read_incrementality_result(const std::string& path, const std::string& segment) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      fail(ErrorCode::Parse, path + ": " + ex.what());
    }
    if (j.value("type", "") != "incrementality") continue;
    if (j.value("segment", "") != segment) continue;
    return incrementality_from_json(j);
  }
  fail(ErrorCode::Data, path + ": no incrementality result" + (segment.empty() ? "" : " for segment " + segment));
}

Report split_files(const std::string& users_path, const std::string& ads_path, const std::string& out_dir,
                   const SplitConfig& config) {
  config.validate();
  const auto users = read_users(users_path);
  const auto ads = read_ads(ads_path);
  const auto assignment = assign_users(users, config);
  const auto copies = split_ads(ads, config);
  const auto user_out = join_path(out_dir, kUserAssignmentFile);
  const auto ads_out = join_path(out_dir, kAdsAssignmentFile);
  write_user_assignment(user_out, assignment);
  write_ads_assignment(ads_out, copies);

  std::int64_t m1 = 0;
  for (const auto& u : assignment) m1 += u.submarket == SubMarket::M1 ? 1 : 0;
  const auto n_users = static_cast<std::int64_t>(assignment.size());
  Report r;
  add_line(r.json, ordered_json{{"type", "split"},
                                {"alpha", config.alpha},
                                {"seed", config.seed},
                                {"users", n_users},
                                {"users_m1", m1},
                                {"users_m2", n_users - m1},
                                {"ads", ads.size()},
                                {"copies", copies.size()},
                                {"user_assignment", user_out},
                                {"ads_assignment", ads_out}});
  r.table = printf_string("users %lld (M1 %lld, M2 %lld), ads %zu, copies %zu\nwrote %s\nwrote %s\n",
                          static_cast<long long>(n_users), static_cast<long long>(m1),
                          static_cast<long long>(n_users - m1), ads.size(), copies.size(), user_out.c_str(),
                          ads_out.c_str());
  return r;
}

Report generate_files(const SimConfig& config, const std::string& out_dir) {
  const auto pop = generate_population(config);
  const auto users = join_path(out_dir, kUsersFile);
  const auto ads = join_path(out_dir, kAdsFile);
  const auto latent = join_path(out_dir, kLatentFile);
  write_users(users, pop.users);
  write_ads(ads, pop.ads);
  write_latent(latent, pop.latent);
  Report r;
  add_line(r.json, ordered_json{{"type", "generate"},
                                {"users", pop.users.size()},
                                {"ads", pop.ads.size()},
                                {"users_file", users},
                                {"ads_file", ads},
                                {"latent_file", latent}});
  r.table = printf_string("users %zu, ads %zu\nwrote %s\nwrote %s\nwrote %s\n", pop.users.size(), pop.ads.size(),
                          users.c_str(), ads.c_str(), latent.c_str());
  return r;
}

Report simulate_files(const SimConfig& config, const SimulatePaths& paths) {
  config.validate();
  const auto users = read_user_assignment(paths.user_assignment);
  const auto copies = read_ads_assignment(paths.ads_assignment);
  const auto latent = load_latent(paths.latent);

  std::vector<Interaction> log;
  const bool closed = config.response.form != ResponseForm::AuctionMicro;
  if (closed)
    log = simulate_outcomes(copies, latent, users, config);
  else
    log = simulate_market_micro(copies, latent, users, config).interactions;
  write_interactions(paths.interactions, log);
  if (!paths.truth.empty()) {
    if (!closed) fail(ErrorCode::InvalidArgument, "ground truth is only available for closed-form responses");
    write_truth(paths.truth, ground_truth(copies, latent, config));
  }

  Report r;
  ordered_json j{{"type", "simulate"},
                 {"copies", copies.size()},
                 {"interactions", log.size()},
                 {"interactions_file", paths.interactions}};
  if (!paths.truth.empty()) j["truth_file"] = paths.truth;
  add_line(r.json, j);
  r.table = printf_string("copies %zu, interactions %zu\nwrote %s\n", copies.size(), log.size(),
                          paths.interactions.c_str());
  if (!paths.truth.empty()) r.table += "wrote " + paths.truth + "\n";
  return r;
}

Report build_report(const BuildResult& result, const std::string& output_path) {
  Report r;
  auto j = to_json(result.stats);
  j["rows"] = result.rows.size();
  if (!output_path.empty()) j["estimation_file"] = output_path;
  add_line(r.json, j);
  const auto& s = result.stats;
  r.table = printf_string("interactions read %lld, counted %lld, other kinds %lld, orphan users %lld, orphan ads %lld\n"
                          "rows %zu\n",
                          static_cast<long long>(s.interactions_read), static_cast<long long>(s.interactions_counted),
                          static_cast<long long>(s.other_kind), static_cast<long long>(s.orphan_users),
                          static_cast<long long>(s.orphan_ads), result.rows.size());
  if (!output_path.empty()) r.table += "wrote " + output_path + "\n";
  return r;
}

Report estimate_report(const std::vector<EstimationRow>& rows, const EstimateOptions& options) {
  std::vector<IncrementalityEstimate> fits;
  if (options.segment_by)
    fits = estimate_incrementality_by_segment(rows, options.spec, *options.segment_by);
  else
    fits.push_back(estimate_incrementality(rows, options.spec));

  Report r;
  r.table = estimate_header();
  const char* label = options.spec.use_fixed_effects ? "abs (fixed effects)" : "abs (pooled)";
  for (const auto& e : fits) {
    add_line(r.json, to_json(e));
    r.table += estimate_line(e, label);
  }
  if (options.naive) {
    const auto naive = estimate_naive_budget_slope(rows, {}, options.spec.confidence_level);
    add_line(r.json, to_json(naive, "naive_budget_slope"));
    r.table += estimate_line(naive, "naive total budget");
  }
  return r;
}

Report lift_report(const std::vector<EstimationRow>& rows, const EstimateOptions& options) {
  std::vector<LiftEstimate> fits;
  if (options.segment_by)
    fits = estimate_lift_by_segment(rows, options.spec, *options.segment_by);
  else
    fits.push_back(estimate_lift(rows, options.spec));

  Report r;
  r.table = printf_string("%-24s %-10s %14s %12s %29s %10s\n", "segment", "term", "estimate", "se", "ci", "p");
  for (const auto& e : fits) {
    add_line(r.json, to_json(e));
    const std::string seg = e.segment.empty() ? "all" : e.segment;
    const std::pair<const char*, const CoefficientEstimate*> terms[] = {
        {"rho", &e.rho}, {"mu", &e.mu}, {"delta_rho", &e.delta_rho}};
    for (const auto& [name, c] : terms)
      r.table += printf_string("%-24s %-10s %14.6g %12.4g [%12.6g, %12.6g] %10.4g\n", seg.c_str(), name, c->value,
                               c->se, c->ci_low, c->ci_high, c->p_value);
  }
  return r;
}

Report balance_report(const std::vector<AdCopy>& copies, double significance,
                      const std::optional<std::string>& segment_feature) {
  const auto b = balance_test(copies, significance, segment_feature);
  Report r;
  r.passed = b.passed;
  add_line(r.json, to_json(b));
  r.table = printf_string("%-24s %8s %10s %14s %14s %10s %10s %10s\n", "segment", "market", "count", "mean",
                          "variance", "p_mean", "p_spread", "p_F");
  auto rows = [&](const BalanceStats& s) {
    const std::string seg = s.segment.empty() ? "all" : s.segment;
    r.table += printf_string("%-24s %8s %10lld %14.6g %14.6g %10.4g %10.4g %10.4g\n", seg.c_str(), "M1",
                             static_cast<long long>(s.m1.count), s.m1.mean, s.m1.variance, s.mean_test.p_value,
                             s.spread_test.p_value, s.variance_ratio.p_value);
    r.table += printf_string("%-24s %8s %10lld %14.6g %14.6g\n", "", "M2", static_cast<long long>(s.m2.count),
                             s.m2.mean, s.m2.variance);
  };
  rows(b.overall);
  for (const auto& s : b.segments) rows(s);
  r.table += printf_string("balance %s at significance %g\n", b.passed ? "PASSED" : "FAILED", significance);
  return r;
}

Report power_report(const SimConfig& config, const PowerOptions& options) {
  const auto curve = power_analysis(config, options);
  Report r;
  add_line(r.json, to_json(curve));
  r.csv = "alpha,replications,mean_rho,monte_carlo_se,mean_reported_se,detectable_effect\n";
  r.table = printf_string("%8s %8s %14s %14s %14s %14s\n", "alpha", "reps", "mean_rho", "mc_se", "mean_se", "mde");
  for (const auto& p : curve.points) {
    r.csv += printf_string("%.17g,%lld,%.17g,%.17g,%.17g,%.17g\n", p.alpha, static_cast<long long>(p.replications),
                           p.mean_rho, p.monte_carlo_se, p.mean_reported_se, p.detectable_effect);
    r.table += printf_string("%8.3f %8lld %14.6g %14.6g %14.6g %14.6g\n", p.alpha,
                             static_cast<long long>(p.replications), p.mean_rho, p.monte_carlo_se,
                             p.mean_reported_se, p.detectable_effect);
  }
  r.table += printf_string("minimum detectable effect at %g%% power, %g%% two-sided size, %lld ads\n",
                           100 * curve.power, 100 * curve.size, static_cast<long long>(curve.n_ads));
  return r;
}

Report side_effect_report(const Population& population, double alpha1, const SplitConfig& split,
                          const SimConfig& config, double significance) {
  const auto s = side_effect_ab(population, alpha1, split, config);
  Report r;
  auto j = to_json(s);
  j["significance"] = significance;
  j["significant"] = s.test.p_value < significance;
  add_line(r.json, j);
  r.table = printf_string("%-12s %8s %8s %14s %14s\n", "arm", "alpha", "ads", "mean_total", "variance");
  for (const auto* arm : {&s.asymmetric, &s.symmetric})
    r.table += printf_string("%-12s %8.3f %8lld %14.6g %14.6g\n", arm == &s.asymmetric ? "asymmetric" : "symmetric",
                             arm->alpha, static_cast<long long>(arm->n_ads), arm->mean_total, arm->variance_total);
  r.table += printf_string("difference %.6g (se %.4g), t %.3f, df %.1f, p %.4g\n", s.test.difference, s.test.se,
                           s.test.statistic, s.test.df, s.test.p_value);
  if (s.closed_form) r.table += printf_string("expected difference %.6g\n", s.expected_difference);
  return r;
}

Report forecast_report(const IncrementalityEstimate& estimate, const ForecastBaseline& baseline,
                       const std::vector<std::int64_t>& levels) {
  const auto points = forecast_performance(estimate, baseline, levels);
  Report r;
  r.csv = "budget_minor,expected_outcome,ci_low,ci_high\n";
  r.table = printf_string("%14s %16s %16s %16s\n", "budget_minor", "expected", "ci_low", "ci_high");
  for (const auto& p : points) {
    add_line(r.json, ordered_json{{"type", "forecast"},
                                  {"budget_minor", p.budget_minor},
                                  {"expected_outcome", p.expected_outcome},
                                  {"ci_low", p.ci_low},
                                  {"ci_high", p.ci_high},
                                  {"baseline_budget_minor", baseline.budget_minor},
                                  {"rho", estimate.rho}});
    r.csv += printf_string("%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(p.budget_minor), p.expected_outcome,
                           p.ci_low, p.ci_high);
    r.table += printf_string("%14lld %16.6g %16.6g %16.6g\n", static_cast<long long>(p.budget_minor),
                             p.expected_outcome, p.ci_low, p.ci_high);
  }
  return r;
}

Report run_all(const SimConfig& sim, const SplitConfig& split, const EstimateOptions& options,
               const std::string& out_dir) {
  split.validate();
  sim.validate();
  Report r;
  auto stage = [&](const Report& s) {
    r.json += s.json;
    r.table += s.table;
  };
  stage(generate_files(sim, out_dir));
  stage(split_files(join_path(out_dir, kUsersFile), join_path(out_dir, kAdsFile), out_dir, split));

  SimulatePaths sp;
  sp.user_assignment = join_path(out_dir, kUserAssignmentFile);
  sp.ads_assignment = join_path(out_dir, kAdsAssignmentFile);
  sp.latent = join_path(out_dir, kLatentFile);
  sp.interactions = join_path(out_dir, kInteractionsFile);
  if (sim.response.form != ResponseForm::AuctionMicro) sp.truth = join_path(out_dir, kTruthFile);
  stage(simulate_files(sim, sp));

  DatasetPaths dp;
  dp.ads_assignment = sp.ads_assignment;
  dp.user_assignment = sp.user_assignment;
  dp.interactions = sp.interactions;
  dp.estimation_output = join_path(out_dir, kEstimationFile);
  BuildOptions bo;
  bo.outcome_kind = sim.outcome_kind;
  const auto built = build_estimation_data(dp, split, bo);
  stage(build_report(built, dp.estimation_output));

  const auto results = estimate_report(built.rows, options);
  const auto results_path = join_path(out_dir, kResultsFile);
  write_text(results_path, results.json);
  r.json += results.json;
  r.table += results.table + "wrote " + results_path + "\n";
  return r;
}

}  // namespace absplit::workflow
