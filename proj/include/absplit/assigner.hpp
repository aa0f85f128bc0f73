#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absplit/types.hpp"

namespace absplit {

struct UserAssignment {
  std::string user_id;
  SubMarket submarket = SubMarket::M1;

  bool operator==(const UserAssignment&) const = default;
};

// Step 1: deterministic user partition. Pure function of (user_id, seed, namespace).
SubMarket assign_user(std::string_view user_id, const SplitConfig& config);

std::vector<UserAssignment> assign_users(const std::vector<std::string>& user_ids, const SplitConfig& config);

// Step 2: high = round-half-up(alpha * total), low = total - high.
// Requires 0.5 <= alpha < 1.
std::pair<Money, Money> split_budget(Money total, double alpha);

// RandB in integer minor units: budget - round-half-up(parent / 2).
SignedMoney rand_b_minor(Money budget, Money parent_total);

// Exact random budget component budget - parent / 2 (a half-integer).
double rand_b_exact(Money budget, Money parent_total);

// Step 3: which copy goes to which sub-market.
Allocation allocate_copies(std::string_view ad_id, const SplitConfig& config);

// Steps 2 and 3 over a set of ads. Output sorted by (ad_id, copy_type) with
// the high copy first.
std::vector<AdCopy> split_ads(const std::vector<Ad>& ads, const SplitConfig& config);

}  // namespace absplit
