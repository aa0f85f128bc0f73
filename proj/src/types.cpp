#include "absplit/types.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace absplit {

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

Money::Money(std::int64_t minor) : minor_(minor) {
  if (minor < 0) fail(ErrorCode::InvalidArgument, "negative money amount: " + std::to_string(minor));
}

std::string_view to_string(SubMarket s) { return s == SubMarket::M1 ? "M1" : "M2"; }
std::string_view to_string(CopyType c) { return c == CopyType::High ? "high" : "low"; }
std::string_view to_string(Allocation a) { return a == Allocation::I ? "I" : "II"; }

std::string_view to_string(InteractionKind k) {
  switch (k) {
    case InteractionKind::Impression: return "impression";
    case InteractionKind::Click: return "click";
    case InteractionKind::Conversion: return "conversion";
  }
  return "conversion";
}

SubMarket parse_submarket(std::string_view s) {
  if (s == "M1") return SubMarket::M1;
  if (s == "M2") return SubMarket::M2;
  fail(ErrorCode::Parse, "unknown sub-market '" + std::string(s) + "' (expected M1 or M2)");
}

CopyType parse_copy_type(std::string_view s) {
  if (s == "high") return CopyType::High;
  if (s == "low") return CopyType::Low;
  fail(ErrorCode::Parse, "unknown copy type '" + std::string(s) + "' (expected high or low)");
}

InteractionKind parse_interaction_kind(std::string_view s) {
  if (s == "impression") return InteractionKind::Impression;
  if (s == "click") return InteractionKind::Click;
  if (s == "conversion") return InteractionKind::Conversion;
  fail(ErrorCode::Parse, "unknown interaction kind '" + std::string(s) + "'");
}

FeatureVector::FeatureVector(std::vector<Entry> entries) {
  for (auto& [name, value] : entries) set(std::move(name), std::move(value));
}

void FeatureVector::set(std::string name, std::string value) {
  for (auto& entry : entries_) {
    if (entry.first == name) {
      entry.second = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(name), std::move(value));
}

std::optional<std::string_view> FeatureVector::get(std::string_view name) const {
  for (const auto& [key, value] : entries_)
    if (key == name) return std::string_view(value);
  return std::nullopt;
}

std::vector<std::string> FeatureVector::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& entry : entries_) out.push_back(entry.first);
  return out;
}

void SplitConfig::validate() const {
  if (alpha == 0.5 && allow_symmetric) return;
  if (!(alpha > 0.5 && alpha < 1.0)) {
    std::ostringstream msg;
    msg << "alpha must lie in (0.5, 1)";
    if (alpha == 0.5) msg << " (0.5 requires symmetric mode)";
    msg << ", got " << alpha;
    fail(ErrorCode::InvalidArgument, msg.str());
  }
}

bool ValidationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const ValidationCheck* ValidationReport::find(std::string_view name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

ValidationReport validate_dataset(const std::vector<EstimationRow>& rows) {
  struct Pair {
    std::vector<const EstimationRow*> high;
    std::vector<const EstimationRow*> low;
  };
  std::map<std::string, Pair> by_ad;
  for (const auto& row : rows) {
    auto& p = by_ad[row.ad_id];
    (row.copy_type == CopyType::High ? p.high : p.low).push_back(&row);
  }

  ValidationCheck pairing{"pairing", true, {}};
  ValidationCheck sums{"sum_preservation", true, {}};
  ValidationCheck ordering{"high_not_below_low", true, {}};
  ValidationCheck distinct{"submarket_distinct", true, {}};

  for (const auto& [ad_id, p] : by_ad) {
    if (p.high.size() != 1 || p.low.size() != 1) {
      pairing.passed = false;
      pairing.failures.push_back(ad_id + ": " + std::to_string(p.high.size()) + " high / " +
                                 std::to_string(p.low.size()) + " low copies");
      continue;
    }
    const auto& high = *p.high.front();
    const auto& low = *p.low.front();
    // The parent budget is not stored per row; it is implied by the pair and
    // must agree with the rounding convention used for rand_b.
    const std::int64_t total = high.budget.minor() + low.budget.minor();
    const std::int64_t half = half_up(total);
    if (high.rand_b.minor != high.budget.minor() - half || low.rand_b.minor != low.budget.minor() - half) {
      sums.passed = false;
      sums.failures.push_back(ad_id + ": copy budgets " + std::to_string(high.budget.minor()) + "+" +
                              std::to_string(low.budget.minor()) + " inconsistent with rand_b " +
                              std::to_string(high.rand_b.minor) + "/" + std::to_string(low.rand_b.minor));
    }
    if (high.budget < low.budget) {
      ordering.passed = false;
      ordering.failures.push_back(ad_id);
    }
    if (high.submarket == low.submarket) {
      distinct.passed = false;
      distinct.failures.push_back(ad_id);
    }
  }
  return ValidationReport{{pairing, sums, ordering, distinct}};
}

}  // namespace absplit
