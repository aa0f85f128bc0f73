#include "absplit/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <tuple>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "absplit/csv.hpp"

namespace absplit {
namespace {

constexpr std::string_view kFeaturePrefix = "feat_";

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::size_t> feature_columns(const csv::Reader& reader) {
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < reader.header().size(); ++i)
    if (reader.header()[i].starts_with(kFeaturePrefix)) cols.push_back(i);
  return cols;
}

FeatureVector read_features(const csv::Reader& reader, const std::vector<std::size_t>& cols,
                            const std::vector<std::string>& fields) {
  FeatureVector f;
  for (auto c : cols) f.set(reader.header()[c], fields[c]);
  return f;
}

// Union of feature names in first-appearance order.
template <typename Range, typename Get>
std::vector<std::string> feature_union(const Range& items, Get get) {
  std::vector<std::string> names;
  for (const auto& item : items)
    for (const auto& [name, value] : get(item).entries())
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
  return names;
}

void append_features(std::vector<std::string>& fields, const std::vector<std::string>& names,
                     const FeatureVector& features) {
  for (const auto& n : names) fields.emplace_back(features.get(n).value_or(""));
}

std::string require_id(const std::string& value, const csv::Reader& reader, std::string_view what) {
  if (value.empty())
    fail(ErrorCode::Parse, reader.path() + ":" + std::to_string(reader.line_number()) + ": empty " + std::string(what));
  return value;
}

class Aggregator {
 public:
  Aggregator(const std::vector<AdCopy>& copies, const BuildOptions& options) : copies_(copies), options_(options) {
    counts_.assign(copies.size(), 0);
    for (std::size_t k = 0; k < copies.size(); ++k) {
      auto& slot = by_ad_.try_emplace(copies[k].ad_id, std::array<std::ptrdiff_t, 2>{-1, -1}).first->second;
      const int m = copies[k].submarket == SubMarket::M1 ? 0 : 1;
      if (slot[m] >= 0)
        fail(ErrorCode::Data, "ads assignment corrupt: ad '" + copies[k].ad_id + "' has two copies in " +
                                  std::string(to_string(copies[k].submarket)));
      slot[m] = static_cast<std::ptrdiff_t>(k);
    }
    for (const auto& [id, slot] : by_ad_)
      if (slot[0] < 0 || slot[1] < 0) fail(ErrorCode::Data, "ads assignment incomplete: ad '" + id + "' lacks a copy");
  }

  template <typename Lookup>
  void add(const Interaction& it, Lookup&& user_market) {
    ++stats_.interactions_read;
    const std::optional<SubMarket> market = user_market(it.user_id);
    if (!market) {
      if (!options_.lenient) fail(ErrorCode::Data, "interaction references unknown user_id '" + it.user_id + "'");
      ++stats_.orphan_users;
      return;
    }
    const auto ad = by_ad_.find(it.ad_id);
    if (ad == by_ad_.end()) {
      if (!options_.lenient) fail(ErrorCode::Data, "interaction references unknown ad_id '" + it.ad_id + "'");
      ++stats_.orphan_ads;
      return;
    }
    if (it.kind != options_.outcome_kind) {
      ++stats_.other_kind;
      return;
    }
    const auto k = ad->second[*market == SubMarket::M1 ? 0 : 1];
    ++counts_[static_cast<std::size_t>(k)];
    ++stats_.interactions_counted;
  }

  BuildResult finish() && {
    std::vector<std::size_t> order(copies_.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(copies_[a].ad_id, copies_[a].copy_type) < std::tie(copies_[b].ad_id, copies_[b].copy_type);
    });
    std::vector<AdCopy> sorted;
    std::vector<std::int64_t> counts;
    sorted.reserve(order.size());
    counts.reserve(order.size());
    for (auto k : order) {
      sorted.push_back(copies_[k]);
      counts.push_back(counts_[k]);
    }
    return BuildResult{to_estimation_rows(sorted, counts), stats_};
  }

 private:
  const std::vector<AdCopy>& copies_;
  BuildOptions options_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<std::string, std::array<std::ptrdiff_t, 2>> by_ad_;
  BuildStats stats_;
};

}  // namespace

std::vector<std::string> read_users(const std::string& path) {
  csv::Reader reader(path);
  const auto col = reader.column("user_id");
  std::vector<std::string> users, fields;
  while (reader.next(fields)) users.push_back(require_id(fields[col], reader, "user_id"));
  return users;
}

void write_users(const std::string& path, const std::vector<std::string>& users) {
  auto out = csv::open_output(path);
  out << "user_id\n";
  for (const auto& u : users) csv::write_row(out, {u});
}

std::vector<Ad> read_ads(const std::string& path) {
  csv::Reader reader(path);
  const auto id_col = reader.column("ad_id");
  const auto budget_col = reader.column("budget_minor");
  const auto alpha_col = reader.find_column("alpha");
  const auto feats = feature_columns(reader);
  std::vector<Ad> ads;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    Ad ad;
    ad.ad_id = require_id(fields[id_col], reader, "ad_id");
    const auto budget = csv::parse_int(fields[budget_col], "budget_minor");
    if (budget < 0) fail(ErrorCode::Data, path + ": negative budget for ad '" + ad.ad_id + "'");
    ad.total_budget = Money(budget);
    if (alpha_col >= 0 && !fields[static_cast<std::size_t>(alpha_col)].empty())
      ad.alpha = csv::parse_double(fields[static_cast<std::size_t>(alpha_col)], "alpha");
    ad.features = read_features(reader, feats, fields);
    ads.push_back(std::move(ad));
  }
  return ads;
}

void write_ads(const std::string& path, const std::vector<Ad>& ads) {
  const auto names = feature_union(ads, [](const Ad& a) -> const FeatureVector& { return a.features; });
  const bool any_alpha = std::any_of(ads.begin(), ads.end(), [](const Ad& a) { return a.alpha.has_value(); });
  auto out = csv::open_output(path);
  std::vector<std::string> header{"ad_id", "budget_minor"};
  if (any_alpha) header.push_back("alpha");
  header.insert(header.end(), names.begin(), names.end());
  csv::write_row(out, header);
  for (const auto& ad : ads) {
    std::vector<std::string> row{ad.ad_id, std::to_string(ad.total_budget.minor())};
    if (any_alpha) row.push_back(ad.alpha ? format_double(*ad.alpha) : "");
    append_features(row, names, ad.features);
    csv::write_row(out, row);
  }
}

std::vector<UserAssignment> read_user_assignment(const std::string& path) {
  csv::Reader reader(path);
  const auto id_col = reader.column("user_id");
  const auto m_col = reader.column("submarket");
  std::vector<UserAssignment> out;
  std::vector<std::string> fields;
  while (reader.next(fields))
    out.push_back({require_id(fields[id_col], reader, "user_id"), parse_submarket(fields[m_col])});
  return out;
}

void write_user_assignment(const std::string& path, const std::vector<UserAssignment>& assignments) {
  auto out = csv::open_output(path);
  out << "user_id,submarket\n";
  for (const auto& a : assignments) csv::write_row(out, {a.user_id, std::string(to_string(a.submarket))});
}

std::vector<AdCopy> read_ads_assignment(const std::string& path) {
  csv::Reader reader(path);
  const auto id_col = reader.column("ad_id");
  const auto copy_col = reader.column("copy");
  const auto m_col = reader.column("submarket");
  const auto b_col = reader.column("budget_minor");
  const auto p_col = reader.column("parent_budget_minor");
  const auto r_col = reader.column("rand_b_minor");
  const auto feats = feature_columns(reader);
  std::vector<AdCopy> out;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    AdCopy c;
    c.ad_id = require_id(fields[id_col], reader, "ad_id");
    c.copy_type = parse_copy_type(fields[copy_col]);
    c.submarket = parse_submarket(fields[m_col]);
    c.budget = Money(csv::parse_int(fields[b_col], "budget_minor"));
    c.parent_total = Money(csv::parse_int(fields[p_col], "parent_budget_minor"));
    c.rand_b = SignedMoney{csv::parse_int(fields[r_col], "rand_b_minor")};
    c.features = read_features(reader, feats, fields);
    out.push_back(std::move(c));
  }
  return out;
}

void write_ads_assignment(const std::string& path, const std::vector<AdCopy>& copies) {
  const auto names = feature_union(copies, [](const AdCopy& c) -> const FeatureVector& { return c.features; });
  auto out = csv::open_output(path);
  std::vector<std::string> header{"ad_id", "copy", "submarket", "budget_minor", "parent_budget_minor", "rand_b_minor"};
  header.insert(header.end(), names.begin(), names.end());
  csv::write_row(out, header);
  for (const auto& c : copies) {
    std::vector<std::string> row{c.ad_id,
                                 std::string(to_string(c.copy_type)),
                                 std::string(to_string(c.submarket)),
                                 std::to_string(c.budget.minor()),
                                 std::to_string(c.parent_total.minor()),
                                 std::to_string(c.rand_b.minor)};
    append_features(row, names, c.features);
    csv::write_row(out, row);
  }
}

std::vector<EstimationRow> read_estimation_data(const std::string& path) {
  csv::Reader reader(path);
  const auto id_col = reader.column("ad_id");
  const auto copy_col = reader.column("copy");
  const auto m_col = reader.column("submarket");
  const auto b_col = reader.column("budget_minor");
  const auto r_col = reader.column("rand_b_minor");
  const auto y_col = reader.column("outcome");
  const auto t_col = reader.column("treatment");
  const auto feats = feature_columns(reader);
  std::vector<EstimationRow> out;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    EstimationRow r;
    r.ad_id = require_id(fields[id_col], reader, "ad_id");
    r.copy_type = parse_copy_type(fields[copy_col]);
    r.submarket = parse_submarket(fields[m_col]);
    r.budget = Money(csv::parse_int(fields[b_col], "budget_minor"));
    r.rand_b = SignedMoney{csv::parse_int(fields[r_col], "rand_b_minor")};
    r.outcome = csv::parse_int(fields[y_col], "outcome");
    if (r.outcome < 0) fail(ErrorCode::Data, path + ": negative outcome for ad '" + r.ad_id + "'");
    const auto treatment = csv::parse_int(fields[t_col], "treatment");
    if (treatment != r.treatment())
      fail(ErrorCode::Data, path + ":" + std::to_string(reader.line_number()) +
                                ": treatment flag disagrees with sub-market");
    r.features = read_features(reader, feats, fields);
    out.push_back(std::move(r));
  }
  return out;
}

void write_estimation_data(const std::string& path, const std::vector<EstimationRow>& rows) {
  const auto names = feature_union(rows, [](const EstimationRow& r) -> const FeatureVector& { return r.features; });
  auto out = csv::open_output(path);
  std::vector<std::string> header{"ad_id",        "copy",    "submarket", "budget_minor",
                                  "rand_b_minor", "outcome", "treatment"};
  header.insert(header.end(), names.begin(), names.end());
  csv::write_row(out, header);
  for (const auto& r : rows) {
    std::vector<std::string> row{r.ad_id,
                                 std::string(to_string(r.copy_type)),
                                 std::string(to_string(r.submarket)),
                                 std::to_string(r.budget.minor()),
                                 std::to_string(r.rand_b.minor),
                                 std::to_string(r.outcome),
                                 std::to_string(r.treatment())};
    append_features(row, names, r.features);
    csv::write_row(out, row);
  }
}

std::vector<AdLatent> read_latent(const std::string& path) {
  csv::Reader reader(path);
  const auto id_col = reader.column("ad_id");
  const auto z_col = reader.column("quality_score");
  const auto q_col = reader.column("quality_multiplier");
  std::vector<AdLatent> out;
  std::vector<std::string> fields;
  while (reader.next(fields))
    out.push_back(AdLatent{require_id(fields[id_col], reader, "ad_id"), csv::parse_double(fields[z_col], "quality_score"),
                           csv::parse_double(fields[q_col], "quality_multiplier")});
  return out;
}

void write_latent(const std::string& path, const std::vector<AdLatent>& latent) {
  auto out = csv::open_output(path);
  out << "ad_id,quality_score,quality_multiplier\n";
  for (const auto& l : latent)
    csv::write_row(out, {l.ad_id, format_double(l.quality_score), format_double(l.quality_multiplier)});
}

void write_truth(const std::string& path, const std::vector<TruthRow>& truth) {
  auto out = csv::open_output(path);
  out << "ad_id,quality_multiplier,slope_control,slope_treatment\n";
  for (const auto& t : truth)
    csv::write_row(out, {t.ad_id, format_double(t.quality_multiplier), format_double(t.slope_control),
                         format_double(t.slope_treatment)});
}

std::vector<TruthRow> read_truth(const std::string& path) {
  csv::Reader reader(path);
  const auto id = reader.column("ad_id");
  const auto q = reader.column("quality_multiplier");
  const auto c = reader.column("slope_control");
  const auto t = reader.column("slope_treatment");
  std::vector<TruthRow> out;
  std::vector<std::string> f;
  while (reader.next(f))
    out.push_back(TruthRow{f[id], csv::parse_double(f[q], "quality_multiplier"), csv::parse_double(f[c], "slope_control"),
                           csv::parse_double(f[t], "slope_treatment")});
  return out;
}

std::string format_interaction(const Interaction& it) {
  nlohmann::ordered_json j;
  j["user_id"] = it.user_id;
  j["ad_id"] = it.ad_id;
  j["kind"] = std::string(to_string(it.kind));
  j["ts"] = it.timestamp_ms;
  return j.dump();
}

Interaction parse_interaction(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    Interaction it;
    it.user_id = j.at("user_id").get<std::string>();
    it.ad_id = j.at("ad_id").get<std::string>();
    it.kind = parse_interaction_kind(j.at("kind").get<std::string>());
    it.timestamp_ms = j.at("ts").get<std::int64_t>();
    if (it.user_id.empty() || it.ad_id.empty()) fail(ErrorCode::Parse, "empty user_id or ad_id");
    return it;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("malformed interaction record: ") + e.what());
  }
}

void write_interactions(const std::string& path, const std::vector<Interaction>& interactions) {
  auto out = csv::open_output(path);
  for (const auto& it : interactions) out << format_interaction(it) << '\n';
}

void for_each_interaction(const std::string& path, const std::function<void(const Interaction&)>& fn) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Interaction it;
    try {
      it = parse_interaction(line);
    } catch (const Error& e) {
      fail(e.code(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    fn(it);
  }
}

std::vector<Interaction> read_interactions(const std::string& path) {
  std::vector<Interaction> out;
  for_each_interaction(path, [&](const Interaction& it) { out.push_back(it); });
  return out;
}

std::vector<EstimationRow> to_estimation_rows(const std::vector<AdCopy>& copies,
                                              const std::vector<std::int64_t>& outcomes) {
  if (copies.size() != outcomes.size()) fail(ErrorCode::InvalidArgument, "copies and outcomes differ in length");
  std::vector<EstimationRow> rows;
  rows.reserve(copies.size());
  for (std::size_t k = 0; k < copies.size(); ++k) {
    const auto& c = copies[k];
    rows.push_back(EstimationRow{c.ad_id, c.copy_type, c.submarket, c.budget, c.rand_b, outcomes[k], c.features});
  }
  return rows;
}

BuildResult build_estimation_data(const std::vector<UserAssignment>& users, const std::vector<AdCopy>& copies,
                                  const std::vector<Interaction>& interactions, const BuildOptions& options) {
  std::unordered_map<std::string, SubMarket> market;
  market.reserve(users.size());
  for (const auto& u : users) market.emplace(u.user_id, u.submarket);
  auto lookup = [&](const std::string& id) -> std::optional<SubMarket> {
    const auto it = market.find(id);
    return it == market.end() ? std::nullopt : std::optional<SubMarket>(it->second);
  };
  Aggregator agg(copies, options);
  for (const auto& it : interactions) agg.add(it, lookup);
  return std::move(agg).finish();
}

BuildResult build_estimation_data(const DatasetPaths& paths, const SplitConfig& config, const BuildOptions& options) {
  std::vector<UserAssignment> users;
  if (!paths.user_assignment.empty()) {
    users = read_user_assignment(paths.user_assignment);
  } else if (!paths.users.empty()) {
    users = assign_users(read_users(paths.users), config);
  } else {
    fail(ErrorCode::InvalidArgument, "build_estimation_data needs a user assignment or a users file");
  }
  const auto copies = read_ads_assignment(paths.ads_assignment);

  std::unordered_map<std::string, SubMarket> market;
  market.reserve(users.size());
  for (auto& u : users) market.emplace(std::move(u.user_id), u.submarket);
  users.clear();
  auto lookup = [&](const std::string& id) -> std::optional<SubMarket> {
    const auto it = market.find(id);
    return it == market.end() ? std::nullopt : std::optional<SubMarket>(it->second);
  };

  Aggregator agg(copies, options);
  for_each_interaction(paths.interactions, [&](const Interaction& it) { agg.add(it, lookup); });
  auto result = std::move(agg).finish();
  if (!paths.estimation_output.empty()) write_estimation_data(paths.estimation_output, result.rows);
  return result;
}

}  // namespace absplit
