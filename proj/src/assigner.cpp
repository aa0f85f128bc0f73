#include "absplit/assigner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "absplit/hashing.hpp"

namespace absplit {

SubMarket assign_user(std::string_view user_id, const SplitConfig& config) {
  if (user_id.empty()) fail(ErrorCode::InvalidArgument, "empty user_id");
  return hash_bit(stable_hash(config.namespaces.user, config.seed, user_id)) ? SubMarket::M2 : SubMarket::M1;
}

std::vector<UserAssignment> assign_users(const std::vector<std::string>& user_ids, const SplitConfig& config) {
  std::vector<UserAssignment> out;
  out.reserve(user_ids.size());
  for (const auto& id : user_ids) out.push_back({id, assign_user(id, config)});
  return out;
}

std::pair<Money, Money> split_budget(Money total, double alpha) {
  if (!(alpha >= 0.5 && alpha < 1.0)) {
    std::ostringstream msg;
    msg << "split_budget: alpha must lie in [0.5, 1), got " << alpha;
    fail(ErrorCode::InvalidArgument, msg.str());
  }
  const std::int64_t b = total.minor();
  std::int64_t high = 0;
  if (alpha == 0.5) {
    high = half_up(b);
  } else {
    // A decimal alpha such as 0.57 is not exact in binary, so a product that
    // should sit on a .5 boundary can land a few ulps below it. Products
    // within that distance of a half are treated as the half and rounded up.
    const double product = alpha * static_cast<double>(b);
    const double floor_part = std::floor(product);
    const double frac = product - floor_part;
    const double tolerance = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, product);
    high = static_cast<std::int64_t>(floor_part) + (frac + tolerance >= 0.5 ? 1 : 0);
    high = std::clamp<std::int64_t>(high, half_up(b), b);
  }
  return {Money(high), Money(b - high)};
}

SignedMoney rand_b_minor(Money budget, Money parent_total) {
  return SignedMoney{budget.minor() - half_up(parent_total.minor())};
}

double rand_b_exact(Money budget, Money parent_total) {
  return static_cast<double>(budget.minor()) - 0.5 * static_cast<double>(parent_total.minor());
}

Allocation allocate_copies(std::string_view ad_id, const SplitConfig& config) {
  if (ad_id.empty()) fail(ErrorCode::InvalidArgument, "empty ad_id");
  return hash_bit(stable_hash(config.namespaces.copy, config.seed, ad_id)) ? Allocation::II : Allocation::I;
}

std::vector<AdCopy> split_ads(const std::vector<Ad>& ads, const SplitConfig& config) {
  config.validate();
  std::set<std::string_view> seen;
  for (const auto& ad : ads) {
    if (ad.ad_id.empty()) fail(ErrorCode::InvalidArgument, "empty ad_id");
    if (!seen.insert(ad.ad_id).second) fail(ErrorCode::InvalidArgument, "duplicate ad_id: " + ad.ad_id);
  }

  std::vector<const Ad*> order;
  order.reserve(ads.size());
  for (const auto& ad : ads) order.push_back(&ad);
  std::sort(order.begin(), order.end(), [](const Ad* a, const Ad* b) { return a->ad_id < b->ad_id; });

  std::vector<AdCopy> copies;
  copies.reserve(2 * ads.size());
  for (const Ad* ad : order) {
    const double alpha = ad->alpha.value_or(config.alpha);
    if (ad->alpha) {
      SplitConfig per_ad = config;
      per_ad.alpha = alpha;
      per_ad.validate();
    }
    const auto [high, low] = split_budget(ad->total_budget, alpha);
    const Allocation allocation = allocate_copies(ad->ad_id, config);
    for (CopyType type : {CopyType::High, CopyType::Low}) {
      const Money budget = type == CopyType::High ? high : low;
      copies.push_back(AdCopy{ad->ad_id, type, submarket_of(allocation, type), budget, ad->total_budget,
                              rand_b_minor(budget, ad->total_budget), ad->features});
    }
  }
  return copies;
}

}  // namespace absplit
