#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "absplit/assigner.hpp"
#include "absplit/types.hpp"

namespace absplit {

enum class ResponseForm { Linear, ConcavePower, Saturating, AuctionMicro };
enum class NoiseKind { None, Poisson, Gaussian };
enum class Pacing { None, Even };

ResponseForm parse_response_form(std::string_view s);
NoiseKind parse_noise_kind(std::string_view s);
std::string_view to_string(ResponseForm f);
std::string_view to_string(NoiseKind n);

// Parameters of the auction micro-simulation. Each sub-market runs its own
// event loop: users arrive as a Poisson process, every arrival triggers a
// second-price auction among copies with budget left, the winner pays
// max(second bid, reserve) capped by its remaining budget.
struct AuctionParams {
  double arrivals_per_user = 5.0;       // expected arrivals per user over the horizon
  std::int64_t horizon_ms = 86'400'000;
  double value_log_mean = 3.9;          // per-ad value per impression, log minor units
  double value_log_sigma = 0.3;
  double bid_noise_sigma = 0.2;         // per-auction multiplicative bid noise
  std::int64_t reserve_minor = 1;
  double click_rate = 0.05;
  double conversion_rate = 0.2;         // per click
  Pacing pacing = Pacing::Even;
};

struct ResponseModel {
  ResponseForm form = ResponseForm::Linear;
  double base = 0.0;                    // Linear: E[Y] = base + slope * B
  double slope = 0.002;
  double scale = 1.0;                   // ConcavePower: E[Y] = scale * B^exponent
  double exponent = 0.9;
  double max_level = 100.0;             // Saturating: E[Y] = max_level * B / (B + half_saturation)
  double half_saturation = 10'000.0;
  AuctionParams auction;
  NoiseKind noise = NoiseKind::Poisson;
  double noise_sigma = 1.0;             // Gaussian noise standard deviation

  void validate() const;
  // Expected outcome at a budget (closed-form forms only).
  double mean(double budget_minor) const;
  // Finite-difference slope between two budgets; the derivative when equal.
  double slope_between(double low_minor, double high_minor) const;
};

// "Realistic" diminishing-returns preset: ConcavePower with exponent 0.9.
ResponseModel realistic_response();

struct BudgetDistribution {
  enum class Kind { LogNormal, Fixed, Empirical };
  Kind kind = Kind::LogNormal;
  double log_mean = 9.2;   // median ~ 99 currency units in cents
  double log_sigma = 0.5;
  std::int64_t fixed_minor = 10'000;
  std::vector<std::int64_t> empirical;  // sorted budgets, minor units

  void validate() const;
  static BudgetDistribution from_file(const std::string& csv_path);
};

// Ads can carry one categorical feature whose levels scale the response.
struct SegmentLevel {
  std::string level;
  double weight = 1.0;
  double multiplier = 1.0;
};

struct SimConfig {
  ResponseModel response;                    // mechanism in M1 (control)
  std::optional<ResponseModel> treatment;    // mechanism in M2; defaults to `response`
  std::int64_t n_users = 10'000;
  std::int64_t n_ads = 1'000;
  BudgetDistribution budget;
  // Correlation between the latent quality score and the budget's Gaussian
  // driver (log budget for LogNormal budgets).
  double confounding_strength = 0.0;
  // Dispersion of the latent quality multiplier; 0 disables quality.
  double quality_sigma = 0.0;
  std::string segment_feature = "segment";
  std::vector<SegmentLevel> segments;
  InteractionKind outcome_kind = InteractionKind::Conversion;
  std::uint64_t seed = 0;

  void validate() const;
  const ResponseModel& response_for(SubMarket s) const;
};

// Side channel carried next to the ads file; never part of the features.
struct AdLatent {
  std::string ad_id;
  double quality_score = 0.0;       // standard normal driver z_q
  double quality_multiplier = 1.0;  // exp(sigma * z_q - sigma^2 / 2)
  bool operator==(const AdLatent&) const = default;
};

struct Population {
  std::vector<std::string> users;
  std::vector<Ad> ads;
  std::vector<AdLatent> latent;
};

// Generative model, per ad with its own seeded stream:
//   z_q, z_e ~ N(0, 1) independent
//   w = c * z_q + sqrt(1 - c^2) * z_e        (c = confounding_strength)
//   LogNormal budget:  B = round(exp(log_mean + log_sigma * w))
//   Empirical budget:  B = empirical quantile at Phi(w)
//   Fixed budget:      B = fixed_minor
//   quality multiplier q = exp(s * z_q - s^2 / 2)  (s = quality_sigma, E[q] = 1)
// so corr(w, z_q) = c exactly in the population.
Population generate_population(const SimConfig& config);

using LatentIndex = std::map<std::string, AdLatent, std::less<>>;
LatentIndex index_latent(const std::vector<AdLatent>& latent);

// Noise-free expected outcome of each copy:
//   q_i * segment multiplier * response_for(submarket).mean(budget).
// An empty latent index means q_i = 1 for every ad; otherwise every copy's ad
// must be present.
std::vector<double> expected_outcomes(const std::vector<AdCopy>& copies, const LatentIndex& latent,
                                      const SimConfig& config);

// Realised counts per copy: Poisson around the mean, Gaussian rounded and
// floored at zero, or the mean rounded half-up when noise is None. Each copy
// draws from its own stream keyed by (seed, ad_id, copy type).
std::vector<std::int64_t> simulate_counts(const std::vector<AdCopy>& copies, const LatentIndex& latent,
                                          const SimConfig& config);

// Closed-form simulation materialised as an interaction log. Interactions of
// a copy are attributed to users drawn uniformly from the copy's own
// sub-market. Output sorted by (timestamp, ad_id, user_id).
std::vector<Interaction> simulate_outcomes(const std::vector<AdCopy>& copies, const LatentIndex& latent,
                                           const std::vector<UserAssignment>& users, const SimConfig& config);

struct MicroStats {
  std::string ad_id;
  CopyType copy_type = CopyType::High;
  std::int64_t budget = 0;
  std::int64_t spent = 0;
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;
  std::int64_t conversions = 0;
};

struct MicroResult {
  std::vector<Interaction> interactions;
  std::vector<MicroStats> per_copy;  // same order as the input copies
};

// Auction micro-simulation (response.form must be AuctionMicro). With noise
// None, clicks and conversions accrue deterministically through fractional
// accumulators instead of Bernoulli draws.
MicroResult simulate_market_micro(const std::vector<AdCopy>& copies, const LatentIndex& latent,
                                  const std::vector<UserAssignment>& users, const SimConfig& config);

struct TruthRow {
  std::string ad_id;
  double quality_multiplier = 1.0;
  double slope_control = 0.0;    // true finite-difference slope under the M1 mechanism
  double slope_treatment = 0.0;  // same under the M2 mechanism
};

// Ground-truth incrementality per ad, evaluated between the ad's two copy
// budgets. Closed-form forms only.
std::vector<TruthRow> ground_truth(const std::vector<AdCopy>& copies, const LatentIndex& latent,
                                   const SimConfig& config);

}  // namespace absplit
