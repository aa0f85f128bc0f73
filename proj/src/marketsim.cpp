#include "absplit/marketsim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <tuple>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "absplit/csv.hpp"
#include "absplit/hashing.hpp"

namespace absplit {

ResponseForm parse_response_form(std::string_view s) {
  if (s == "linear") return ResponseForm::Linear;
  if (s == "concave" || s == "concave_power") return ResponseForm::ConcavePower;
  if (s == "saturating") return ResponseForm::Saturating;
  if (s == "auction" || s == "auction_micro") return ResponseForm::AuctionMicro;
  fail(ErrorCode::InvalidArgument, "unknown response form '" + std::string(s) + "'");
}

NoiseKind parse_noise_kind(std::string_view s) {
  if (s == "none") return NoiseKind::None;
  if (s == "poisson") return NoiseKind::Poisson;
  if (s == "gaussian") return NoiseKind::Gaussian;
  fail(ErrorCode::InvalidArgument, "unknown noise model '" + std::string(s) + "'");
}

std::string_view to_string(ResponseForm f) {
  switch (f) {
    case ResponseForm::Linear: return "linear";
    case ResponseForm::ConcavePower: return "concave_power";
    case ResponseForm::Saturating: return "saturating";
    case ResponseForm::AuctionMicro: return "auction_micro";
  }
  return "linear";
}

std::string_view to_string(NoiseKind n) {
  switch (n) {
    case NoiseKind::None: return "none";
    case NoiseKind::Poisson: return "poisson";
    case NoiseKind::Gaussian: return "gaussian";
  }
  return "none";
}

void ResponseModel::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::InvalidArgument, "response model: " + what); };
  switch (form) {
    case ResponseForm::Linear:
      if (!(slope >= 0.0) || !std::isfinite(base)) bad("linear slope must be >= 0");
      break;
    case ResponseForm::ConcavePower:
      if (!(scale >= 0.0)) bad("scale must be >= 0");
      if (!(exponent > 0.0 && exponent <= 1.0)) bad("exponent must lie in (0, 1]");
      break;
    case ResponseForm::Saturating:
      if (!(max_level >= 0.0)) bad("max level must be >= 0");
      if (!(half_saturation > 0.0)) bad("half-saturation budget must be > 0");
      break;
    case ResponseForm::AuctionMicro:
      if (!(auction.arrivals_per_user >= 0.0)) bad("arrival rate must be >= 0");
      if (auction.horizon_ms <= 0) bad("horizon must be positive");
      if (!(auction.value_log_sigma >= 0.0 && auction.bid_noise_sigma >= 0.0)) bad("sigmas must be >= 0");
      if (auction.reserve_minor < 1) bad("reserve price must be >= 1 minor unit");
      if (!(auction.click_rate >= 0.0 && auction.click_rate <= 1.0)) bad("click rate must lie in [0, 1]");
      if (!(auction.conversion_rate >= 0.0 && auction.conversion_rate <= 1.0))
        bad("conversion rate must lie in [0, 1]");
      break;
  }
  if (noise == NoiseKind::Gaussian && !(noise_sigma >= 0.0)) bad("noise sigma must be >= 0");
}

double ResponseModel::mean(double b) const {
  switch (form) {
    case ResponseForm::Linear: return base + slope * b;
    case ResponseForm::ConcavePower: return b <= 0.0 ? 0.0 : scale * std::pow(b, exponent);
    case ResponseForm::Saturating: return max_level * b / (b + half_saturation);
    case ResponseForm::AuctionMicro: break;
  }
  fail(ErrorCode::InvalidArgument, "auction micro-mode has no closed-form mean");
}

double ResponseModel::slope_between(double lo, double hi) const {
  if (lo != hi) return (mean(hi) - mean(lo)) / (hi - lo);
  switch (form) {
    case ResponseForm::Linear: return slope;
    case ResponseForm::ConcavePower:
      return lo <= 0.0 ? std::numeric_limits<double>::infinity() : scale * exponent * std::pow(lo, exponent - 1.0);
    case ResponseForm::Saturating:
      return max_level * half_saturation / ((lo + half_saturation) * (lo + half_saturation));
    case ResponseForm::AuctionMicro: break;
  }
  fail(ErrorCode::InvalidArgument, "auction micro-mode has no closed-form slope");
}

ResponseModel realistic_response() {
  ResponseModel m;
  m.form = ResponseForm::ConcavePower;
  m.scale = 0.005;
  m.exponent = 0.9;
  return m;
}

void BudgetDistribution::validate() const {
  switch (kind) {
    case Kind::LogNormal:
      if (!std::isfinite(log_mean) || !(log_sigma >= 0.0)) fail(ErrorCode::InvalidArgument, "invalid lognormal budget");
      if (log_mean > 36.0) fail(ErrorCode::InvalidArgument, "lognormal budget location too large");
      break;
    case Kind::Fixed:
      if (fixed_minor < 0) fail(ErrorCode::InvalidArgument, "fixed budget must be >= 0");
      break;
    case Kind::Empirical:
      if (empirical.empty()) fail(ErrorCode::InvalidArgument, "empirical budget distribution is empty");
      if (empirical.front() < 0) fail(ErrorCode::InvalidArgument, "empirical budgets must be >= 0");
      break;
  }
}

BudgetDistribution BudgetDistribution::from_file(const std::string& path) {
  csv::Reader reader(path);
  const auto col = reader.column("budget_minor");
  BudgetDistribution d;
  d.kind = Kind::Empirical;
  std::vector<std::string> fields;
  while (reader.next(fields)) d.empirical.push_back(csv::parse_int(fields[col], "budget_minor"));
  std::sort(d.empirical.begin(), d.empirical.end());
  d.validate();
  return d;
}

void SimConfig::validate() const {
  response.validate();
  if (treatment) {
    treatment->validate();
    if ((treatment->form == ResponseForm::AuctionMicro) != (response.form == ResponseForm::AuctionMicro))
      fail(ErrorCode::InvalidArgument, "both sub-markets must use the same simulation fidelity");
  }
  if (n_users < 1 || n_ads < 1) fail(ErrorCode::InvalidArgument, "n_users and n_ads must be >= 1");
  budget.validate();
  if (!(confounding_strength >= -1.0 && confounding_strength <= 1.0))
    fail(ErrorCode::InvalidArgument, "confounding strength must lie in [-1, 1]");
  if (!(quality_sigma >= 0.0)) fail(ErrorCode::InvalidArgument, "quality sigma must be >= 0");
  for (const auto& s : segments)
    if (!(s.weight > 0.0) || !(s.multiplier >= 0.0))
      fail(ErrorCode::InvalidArgument, "segment '" + s.level + "' needs weight > 0 and multiplier >= 0");
}

const ResponseModel& SimConfig::response_for(SubMarket s) const {
  return s == SubMarket::M2 && treatment ? *treatment : response;
}

namespace {

using Engine = boost::random::mt19937_64;

std::string padded_id(std::string_view prefix, std::int64_t i, std::int64_t n) {
  const int width = static_cast<int>(std::to_string(std::max<std::int64_t>(n, 1)).size());
  std::ostringstream os;
  os << prefix << std::setw(width) << std::setfill('0') << i;
  return os.str();
}

std::int64_t draw_budget(const BudgetDistribution& d, double w) {
  switch (d.kind) {
    case BudgetDistribution::Kind::Fixed: return d.fixed_minor;
    case BudgetDistribution::Kind::LogNormal:
      return static_cast<std::int64_t>(std::floor(std::exp(d.log_mean + d.log_sigma * w) + 0.5));
    case BudgetDistribution::Kind::Empirical: {
      const double u = boost::math::cdf(boost::math::normal(), w);
      auto idx = static_cast<std::size_t>(u * static_cast<double>(d.empirical.size()));
      idx = std::min(idx, d.empirical.size() - 1);
      return d.empirical[idx];
    }
  }
  return 0;
}

const std::string* pick_segment(const SimConfig& config, double u) {
  if (config.segments.empty()) return nullptr;
  double total = 0.0;
  for (const auto& s : config.segments) total += s.weight;
  double acc = 0.0;
  for (const auto& s : config.segments) {
    acc += s.weight / total;
    if (u < acc) return &s.level;
  }
  return &config.segments.back().level;
}

double segment_multiplier(const SimConfig& config, const FeatureVector& features) {
  if (config.segments.empty()) return 1.0;
  const auto level = features.get("feat_" + config.segment_feature);
  if (!level) return 1.0;
  for (const auto& s : config.segments)
    if (s.level == *level) return s.multiplier;
  return 1.0;
}

double quality_of(const LatentIndex& latent, const std::string& ad_id) {
  if (latent.empty()) return 1.0;
  const auto it = latent.find(ad_id);
  if (it == latent.end()) fail(ErrorCode::Data, "copy references unknown ad '" + ad_id + "'");
  return it->second.quality_multiplier;
}

std::uint64_t copy_seed(std::uint64_t seed, const AdCopy& copy) {
  return derive_seed(seed, "absplit.sim.copy", copy.ad_id + "/" + std::string(to_string(copy.copy_type)));
}

std::int64_t draw_count(double mean, const ResponseModel& model, Engine& rng) {
  if (!(mean > 0.0)) return 0;
  switch (model.noise) {
    case NoiseKind::None: return static_cast<std::int64_t>(std::floor(mean + 0.5));
    case NoiseKind::Poisson: return boost::random::poisson_distribution<std::int64_t, double>(mean)(rng);
    case NoiseKind::Gaussian: {
      const double draw = mean + model.noise_sigma * boost::random::normal_distribution<double>()(rng);
      return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(draw + 0.5)));
    }
  }
  return 0;
}

}  // namespace

Population generate_population(const SimConfig& config) {
  config.validate();
  Population pop;
  pop.users.reserve(static_cast<std::size_t>(config.n_users));
  for (std::int64_t i = 1; i <= config.n_users; ++i) pop.users.push_back(padded_id("u", i, config.n_users));

  const double c = config.confounding_strength;
  const double c_perp = std::sqrt(std::max(0.0, 1.0 - c * c));
  const double s = config.quality_sigma;
  pop.ads.reserve(static_cast<std::size_t>(config.n_ads));
  pop.latent.reserve(static_cast<std::size_t>(config.n_ads));
  for (std::int64_t i = 1; i <= config.n_ads; ++i) {
    std::string id = padded_id("ad", i, config.n_ads);
    Engine rng(derive_seed(config.seed, "absplit.sim.ad", id));
    boost::random::normal_distribution<double> normal;
    const double z_q = normal(rng);
    const double z_e = normal(rng);
    const double w = c * z_q + c_perp * z_e;

    Ad ad;
    ad.ad_id = id;
    ad.total_budget = Money(draw_budget(config.budget, w));
    if (const auto* level = pick_segment(config, hash_unit(rng()))) ad.features.set("feat_" + config.segment_feature, *level);
    pop.ads.push_back(std::move(ad));
    pop.latent.push_back(AdLatent{std::move(id), z_q, std::exp(s * z_q - 0.5 * s * s)});
  }
  return pop;
}

LatentIndex index_latent(const std::vector<AdLatent>& latent) {
  LatentIndex idx;
  for (const auto& l : latent) idx.emplace(l.ad_id, l);
  return idx;
}

std::vector<double> expected_outcomes(const std::vector<AdCopy>& copies, const LatentIndex& latent,
                                      const SimConfig& config) {
  std::vector<double> out;
  out.reserve(copies.size());
  for (const auto& copy : copies) {
    const auto& model = config.response_for(copy.submarket);
    const double multiplier = quality_of(latent, copy.ad_id) * segment_multiplier(config, copy.features);
    out.push_back(multiplier * model.mean(static_cast<double>(copy.budget.minor())));
  }
  return out;
}

std::vector<std::int64_t> simulate_counts(const std::vector<AdCopy>& copies, const LatentIndex& latent,
                                          const SimConfig& config) {
  config.validate();
  const auto means = expected_outcomes(copies, latent, config);
  std::vector<std::int64_t> counts(copies.size());
  for (std::size_t k = 0; k < copies.size(); ++k) {
    Engine rng(copy_seed(config.seed, copies[k]));
    counts[k] = draw_count(means[k], config.response_for(copies[k].submarket), rng);
  }
  return counts;
}

std::vector<Interaction> simulate_outcomes(const std::vector<AdCopy>& copies, const LatentIndex& latent,
                                           const std::vector<UserAssignment>& users, const SimConfig& config) {
  const auto counts = simulate_counts(copies, latent, config);

  std::vector<std::string> pool[2];
  for (const auto& u : users) pool[u.submarket == SubMarket::M1 ? 0 : 1].push_back(u.user_id);
  for (auto& p : pool) std::sort(p.begin(), p.end());

  const std::int64_t horizon = config.response.auction.horizon_ms;
  std::vector<Interaction> log;
  for (std::size_t k = 0; k < copies.size(); ++k) {
    if (counts[k] == 0) continue;
    const auto& members = pool[copies[k].submarket == SubMarket::M1 ? 0 : 1];
    if (members.empty())
      fail(ErrorCode::Data, "sub-market " + std::string(to_string(copies[k].submarket)) + " has no users");
    // Attribution draws use a stream separate from the count draw.
    Engine rng(derive_seed(copy_seed(config.seed, copies[k]), "absplit.sim.attribution", 0));
    boost::random::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    boost::random::uniform_int_distribution<std::int64_t> when(0, horizon - 1);
    for (std::int64_t n = 0; n < counts[k]; ++n) {
      const auto& user = members[pick(rng)];
      log.push_back(Interaction{user, copies[k].ad_id, config.outcome_kind, when(rng)});
    }
  }
  std::sort(log.begin(), log.end(), [](const Interaction& a, const Interaction& b) {
    return std::tie(a.timestamp_ms, a.ad_id, a.user_id) < std::tie(b.timestamp_ms, b.ad_id, b.user_id);
  });
  return log;
}

std::vector<TruthRow> ground_truth(const std::vector<AdCopy>& copies, const LatentIndex& latent,
                                   const SimConfig& config) {
  std::map<std::string, std::pair<const AdCopy*, const AdCopy*>> pairs;
  for (const auto& c : copies) {
    auto& p = pairs[c.ad_id];
    (c.copy_type == CopyType::High ? p.first : p.second) = &c;
  }
  std::vector<TruthRow> out;
  out.reserve(pairs.size());
  for (const auto& [id, p] : pairs) {
    if (!p.first || !p.second) fail(ErrorCode::Data, "ad '" + id + "' lacks one of its copies");
    const double q = quality_of(latent, id) * segment_multiplier(config, p.first->features);
    const double lo = static_cast<double>(p.second->budget.minor());
    const double hi = static_cast<double>(p.first->budget.minor());
    out.push_back(TruthRow{id, quality_of(latent, id), q * config.response_for(SubMarket::M1).slope_between(lo, hi),
                           q * config.response_for(SubMarket::M2).slope_between(lo, hi)});
  }
  return out;
}

}  // namespace absplit
