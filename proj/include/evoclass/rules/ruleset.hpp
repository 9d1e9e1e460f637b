#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "evoclass/core/date.hpp"
#include "evoclass/rules/rule.hpp"

namespace evoclass::rules {

enum class Environment { Dev, Test, Prod };

inline constexpr Environment kEnvironments[] = {Environment::Dev, Environment::Test, Environment::Prod};

inline std::string_view to_string(Environment e) {
  switch (e) {
    case Environment::Dev: return "dev";
    case Environment::Test: return "test";
    case Environment::Prod: return "prod";
  }
  return "dev";
}

inline Environment parse_environment(std::string_view s) {
  if (s == "dev") return Environment::Dev;
  if (s == "test") return Environment::Test;
  if (s == "prod") return Environment::Prod;
  throw std::invalid_argument("unknown environment '" + std::string(s) + "' (expected dev|test|prod)");
}

struct RuleSet {
  std::string versionId;
  Environment environment = Environment::Dev;
  std::vector<Rule> validationRules;
  std::vector<Rule> aggregationRules;
};

/// Raised when a payload cannot be processed at all. The registry maps it to a 500.
class ServerFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using RuleResults = std::vector<std::pair<std::string, RuleOutcome>>;

// One outcome per validation rule, in catalog order.
inline RuleResults validate_message(const RuleSet& ruleset, const CancerMessage& msg) {
  RuleResults out;
  out.reserve(ruleset.validationRules.size());
  for (const auto& r : ruleset.validationRules) out.emplace_back(r.ruleId, evaluate_rule(r, msg));
  return out;
}

struct AggregatedCase {
  std::string caseId;
  std::size_t messageCount = 0;
  std::vector<std::pair<std::string, bool>> satisfied;
};

// Dates that pass the shape check but name no real day.
inline void check_calendar(std::string_view what, const std::optional<std::string_view>& date) {
  if (date && is_date_format_valid(*date) && !is_calendar_date(*date)) {
    throw ServerFault(std::string(what) + " is not a calendar date: " + std::string(*date));
  }
}

inline std::pair<AggregatedCase, RuleResults> aggregate_case(const RuleSet& ruleset, const CancerCase& c) {
  check_calendar("cancerCase.diagnosedato",
                 c.diagnosedato ? std::optional<std::string_view>(*c.diagnosedato) : std::nullopt);
  for (const auto& m : c.messages) check_calendar("cancerMessage.diagnosedato", m.get(field::kDiagnosedato));

  AggregatedCase agg{c.caseId, c.messages.size(), {}};
  RuleResults outcomes;
  outcomes.reserve(ruleset.aggregationRules.size());
  for (const auto& r : ruleset.aggregationRules) {
    auto outcome = evaluate_rule(r, c);
    agg.satisfied.emplace_back(r.ruleId, std::get<Applied>(outcome).satisfied);
    outcomes.emplace_back(r.ruleId, std::move(outcome));
  }
  return {std::move(agg), std::move(outcomes)};
}

}  // namespace evoclass::rules
