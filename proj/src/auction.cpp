#include <algorithm>
#include <cmath>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "absplit/hashing.hpp"
#include "absplit/marketsim.hpp"

namespace absplit {
namespace {

using Engine = boost::random::mt19937_64;

struct Bidder {
  std::size_t copy_index = 0;
  double value = 0.0;
  double click_rate = 0.0;
  std::int64_t remaining = 0;
  double click_credit = 0.0;
  double conversion_credit = 0.0;
};

double ad_value(const AuctionParams& p, std::uint64_t seed, const std::string& ad_id) {
  // Both copies of an ad share one value draw: they are clones.
  Engine rng(derive_seed(seed, "absplit.sim.value", ad_id));
  return std::exp(p.value_log_mean + p.value_log_sigma * boost::random::normal_distribution<double>()(rng));
}

void run_submarket(SubMarket market, const std::vector<AdCopy>& copies, const std::vector<std::string>& members,
                   const LatentIndex& latent, const SimConfig& config, MicroResult& result) {
  const ResponseModel& model = config.response_for(market);
  const AuctionParams& p = model.auction;

  std::vector<Bidder> bidders;
  for (std::size_t k = 0; k < copies.size(); ++k) {
    if (copies[k].submarket != market || copies[k].budget.minor() == 0) continue;
    double quality = 1.0;
    if (!latent.empty()) {
      const auto it = latent.find(copies[k].ad_id);
      if (it == latent.end()) fail(ErrorCode::Data, "copy references unknown ad '" + copies[k].ad_id + "'");
      quality = it->second.quality_multiplier;
    }
    bidders.push_back(Bidder{k, ad_value(p, config.seed, copies[k].ad_id), std::min(1.0, p.click_rate * quality),
                             copies[k].budget.minor(), 0.0, 0.0});
  }
  if (bidders.empty() || members.empty()) return;

  Engine rng(derive_seed(config.seed, "absplit.sim.micro", to_string(market)));
  const double horizon = static_cast<double>(p.horizon_ms);
  const double rate = p.arrivals_per_user * static_cast<double>(members.size()) / horizon;
  if (!(rate > 0.0)) return;
  boost::random::exponential_distribution<double> gap(rate);
  boost::random::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
  boost::random::normal_distribution<double> normal;
  const bool stochastic = model.noise != NoiseKind::None;
  const double reserve = static_cast<double>(p.reserve_minor);
  const double noise_shift = 0.5 * p.bid_noise_sigma * p.bid_noise_sigma;

  std::size_t active = bidders.size();
  double now = 0.0;
  while (active > 0) {
    now += gap(rng);
    if (now >= horizon) break;
    const auto& user = members[pick(rng)];

    Bidder* best = nullptr;
    double best_bid = 0.0, second_bid = 0.0;
    for (auto& b : bidders) {
      if (b.remaining <= 0) continue;
      double bid = b.value * std::exp(p.bid_noise_sigma * normal(rng) - noise_shift);
      if (p.pacing == Pacing::Even) {
        const auto& budget = copies[b.copy_index].budget;
        const double budget_left = static_cast<double>(b.remaining) / static_cast<double>(budget.minor());
        const double time_left = 1.0 - now / horizon;
        bid *= std::min(1.0, budget_left / time_left);
      }
      if (bid < reserve) continue;
      if (!best || bid > best_bid) {
        second_bid = best ? best_bid : 0.0;
        best = &b;
        best_bid = bid;
      } else if (bid > second_bid) {
        second_bid = bid;
      }
    }
    if (!best) continue;

    const auto clearing = static_cast<std::int64_t>(std::ceil(std::max(second_bid, reserve)));
    const std::int64_t price = std::min(best->remaining, clearing);
    best->remaining -= price;
    if (best->remaining == 0) --active;

    const AdCopy& copy = copies[best->copy_index];
    MicroStats& stats = result.per_copy[best->copy_index];
    stats.spent += price;
    ++stats.impressions;
    const auto ts = static_cast<std::int64_t>(now);
    result.interactions.push_back(Interaction{user, copy.ad_id, InteractionKind::Impression, ts});

    bool clicked = false, converted = false;
    if (stochastic) {
      clicked = boost::random::bernoulli_distribution<double>(best->click_rate)(rng);
      converted = clicked && boost::random::bernoulli_distribution<double>(p.conversion_rate)(rng);
    } else {
      best->click_credit += best->click_rate;
      if (best->click_credit >= 1.0) {
        best->click_credit -= 1.0;
        clicked = true;
        best->conversion_credit += p.conversion_rate;
        if (best->conversion_credit >= 1.0) {
          best->conversion_credit -= 1.0;
          converted = true;
        }
      }
    }
    if (clicked) {
      ++stats.clicks;
      result.interactions.push_back(Interaction{user, copy.ad_id, InteractionKind::Click, ts});
    }
    if (converted) {
      ++stats.conversions;
      result.interactions.push_back(Interaction{user, copy.ad_id, InteractionKind::Conversion, ts});
    }
  }
}

}  // namespace

MicroResult simulate_market_micro(const std::vector<AdCopy>& copies, const LatentIndex& latent,
                                  const std::vector<UserAssignment>& users, const SimConfig& config) {
  config.validate();
  if (config.response.form != ResponseForm::AuctionMicro)
    fail(ErrorCode::InvalidArgument, "simulate_market_micro requires the auction_micro response form");

  MicroResult result;
  result.per_copy.reserve(copies.size());
  for (const auto& c : copies) result.per_copy.push_back(MicroStats{c.ad_id, c.copy_type, c.budget.minor(), 0, 0, 0, 0});

  std::vector<std::string> pool[2];
  for (const auto& u : users) pool[u.submarket == SubMarket::M1 ? 0 : 1].push_back(u.user_id);
  for (auto& p : pool) std::sort(p.begin(), p.end());

  // The two sub-markets share no state; each could run on its own thread.
  run_submarket(SubMarket::M1, copies, pool[0], latent, config, result);
  run_submarket(SubMarket::M2, copies, pool[1], latent, config, result);

  std::stable_sort(result.interactions.begin(), result.interactions.end(),
                   [](const Interaction& a, const Interaction& b) { return a.timestamp_ms < b.timestamp_ms; });
  return result;
}

}  // namespace absplit
