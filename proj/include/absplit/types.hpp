#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace absplit {

enum class ErrorCode {
  InvalidArgument = 1,
  Io = 2,
  Parse = 3,
  Data = 4,
  Estimation = 5,
};

// Every failure raised by the library carries a category so the C layer can
// map it onto a status code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

// Non-negative amount in integer minor currency units (cents).
class Money {
 public:
  constexpr Money() = default;
  explicit Money(std::int64_t minor);

  constexpr std::int64_t minor() const noexcept { return minor_; }
  auto operator<=>(const Money&) const = default;

 private:
  std::int64_t minor_ = 0;
};

// Signed minor-unit amount; used for the random budget component.
struct SignedMoney {
  std::int64_t minor = 0;
  auto operator<=>(const SignedMoney&) const = default;
};

enum class SubMarket { M1, M2 };
enum class CopyType { High, Low };
enum class Allocation { I, II };  // I: High->M1, Low->M2; II: High->M2, Low->M1
enum class InteractionKind { Impression, Click, Conversion };

std::string_view to_string(SubMarket s);
std::string_view to_string(CopyType c);
std::string_view to_string(Allocation a);
std::string_view to_string(InteractionKind k);
SubMarket parse_submarket(std::string_view s);
CopyType parse_copy_type(std::string_view s);
InteractionKind parse_interaction_kind(std::string_view s);

constexpr SubMarket other(SubMarket s) { return s == SubMarket::M1 ? SubMarket::M2 : SubMarket::M1; }

// Submarket receiving the given copy under an allocation.
constexpr SubMarket submarket_of(Allocation a, CopyType c) {
  const bool high_to_m1 = a == Allocation::I;
  return (c == CopyType::High) == high_to_m1 ? SubMarket::M1 : SubMarket::M2;
}

// Named categorical features, kept in insertion (column) order.
class FeatureVector {
 public:
  using Entry = std::pair<std::string, std::string>;

  FeatureVector() = default;
  explicit FeatureVector(std::vector<Entry> entries);

  void set(std::string name, std::string value);
  std::optional<std::string_view> get(std::string_view name) const;
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<std::string> names() const;
  bool empty() const noexcept { return entries_.empty(); }

  bool operator==(const FeatureVector&) const = default;

 private:
  std::vector<Entry> entries_;
};

struct Ad {
  std::string ad_id;
  Money total_budget;
  FeatureVector features;
  std::optional<double> alpha;  // per-ad override of SplitConfig::alpha

  bool operator==(const Ad&) const = default;
};

struct AdCopy {
  std::string ad_id;
  CopyType copy_type = CopyType::High;
  SubMarket submarket = SubMarket::M1;
  Money budget;
  Money parent_total;
  SignedMoney rand_b;
  FeatureVector features;

  bool operator==(const AdCopy&) const = default;
};

struct HashNamespaces {
  std::string user = "absplit.user";
  std::string copy = "absplit.copy";
  std::string side_effect = "absplit.sidefx";
};

inline constexpr double kDefaultAlpha = 0.6;

struct SplitConfig {
  double alpha = kDefaultAlpha;
  std::uint64_t seed = 0;
  HashNamespaces namespaces;
  // alpha == 0.5 is only accepted when this is set.
  bool allow_symmetric = false;

  // Throws InvalidArgument unless alpha is in (0.5, 1), or exactly 0.5 in
  // symmetric mode.
  void validate() const;
};

struct Interaction {
  std::string user_id;
  std::string ad_id;
  InteractionKind kind = InteractionKind::Conversion;
  std::int64_t timestamp_ms = 0;

  bool operator==(const Interaction&) const = default;
};

struct EstimationRow {
  std::string ad_id;
  CopyType copy_type = CopyType::High;
  SubMarket submarket = SubMarket::M1;
  Money budget;
  SignedMoney rand_b;
  std::int64_t outcome = 0;
  FeatureVector features;

  // m = 1 iff the copy runs in the second (treatment) sub-market.
  int treatment() const noexcept { return submarket == SubMarket::M2 ? 1 : 0; }
  bool operator==(const EstimationRow&) const = default;
};

struct IncrementalityEstimate {
  std::string segment;  // empty for a pooled fit
  double rho = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
  double confidence_level = 0.95;
  std::int64_t n_ads = 0;
  std::int64_t n_rows = 0;
  std::int64_t n_excluded_ads = 0;
  bool used_fixed_effects = false;
  bool used_weights = true;
  std::vector<std::string> control_features;
};

struct CoefficientEstimate {
  double value = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
};

struct LiftEstimate {
  std::string segment;
  CoefficientEstimate rho;        // incrementality under control (M1)
  CoefficientEstimate mu;         // budget-independent shift of treatment
  CoefficientEstimate delta_rho;  // incrementality difference, treatment minus control
  double confidence_level = 0.95;
  std::int64_t n_ads = 0;
  std::int64_t n_rows = 0;
  std::int64_t n_excluded_ads = 0;
  bool used_fixed_effects = false;
  bool used_weights = true;
  std::vector<std::string> control_features;
};

// Round-half-up of a non-negative half-integer quantity: ceil(total / 2).
constexpr std::int64_t half_up(std::int64_t total) { return total - total / 2; }

struct ValidationCheck {
  std::string name;
  bool passed = true;
  std::vector<std::string> failures;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const;
  const ValidationCheck* find(std::string_view name) const;
};

// Checks pairing completeness, sum preservation and sub-market distinctness
// of an estimation dataset. Never throws on bad data.
ValidationReport validate_dataset(const std::vector<EstimationRow>& rows);

}  // namespace absplit
