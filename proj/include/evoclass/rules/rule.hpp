#pragma once

#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "evoclass/core/date.hpp"
#include "evoclass/rules/dsl.hpp"
#include "evoclass/rules/message.hpp"

namespace evoclass::rules {

enum class RuleKind { Validation, Aggregation };

inline std::string_view to_string(RuleKind k) { return k == RuleKind::Validation ? "validation" : "aggregation"; }

inline RuleKind parse_rule_kind(std::string_view s) {
  if (s == "validation") return RuleKind::Validation;
  if (s == "aggregation") return RuleKind::Aggregation;
  throw std::invalid_argument("unknown rule kind '" + std::string(s) + "'");
}

inline constexpr std::string_view kScopeAll = "All";

struct Rule {
  std::string ruleId;
  RuleKind kind = RuleKind::Validation;
  std::string scope{kScopeAll};  // a cancer type, or "All"
  ExprPtr expr;
  std::set<std::string> requiredFields;

  std::string text() const { return print_expr(*expr); }
};

inline Rule parse_rule(std::string_view text, std::string ruleId, RuleKind kind, std::string scope = std::string(kScopeAll)) {
  Rule r;
  r.ruleId = std::move(ruleId);
  r.kind = kind;
  r.scope = std::move(scope);
  r.expr = parse_expr(text);
  if (kind == RuleKind::Aggregation && std::holds_alternative<Implication>(r.expr->node)) {
    throw ParseError(ParseError::Kind::Syntax, 1, "aggregation rules cannot use 'implies'");
  }
  r.requiredFields = referenced_fields(*r.expr);
  return r;
}

struct Applied {
  bool satisfied = false;
  friend bool operator==(const Applied&, const Applied&) = default;
};

struct NotApplied {
  std::string blockingField;
  friend bool operator==(const NotApplied&, const NotApplied&) = default;
};

using RuleOutcome = std::variant<Applied, NotApplied>;

inline bool is_applied(const RuleOutcome& o) { return std::holds_alternative<Applied>(o); }

inline std::string outcome_text(const RuleOutcome& o) {
  if (const auto* a = std::get_if<Applied>(&o)) return a->satisfied ? "Rule satisfied" : "Rule violated";
  const auto& field = std::get<NotApplied>(o).blockingField;
  if (detail::iequals(field, field::kDiagnosedato)) return "This rule is not used because of diagnose date";
  return "This rule is not used because of " + field;
}

namespace detail {

template <typename Lookup>
std::string_view operand_value(const Operand& op, Lookup&& lookup) {
  return std::visit([&](const auto& o) -> std::string_view {
    if constexpr (std::is_same_v<std::decay_t<decltype(o)>, FieldRef>) {
      return lookup(o.name);
    } else {
      const std::string_view v = lookup(o.field);
      const auto first = static_cast<std::size_t>(o.first - 1);
      if (first >= v.size()) return {};
      return v.substr(first, static_cast<std::size_t>(o.last - o.first + 1));
    }
  }, op);
}

// Every referenced field must already be known to exist.
template <typename Lookup>
bool eval(const Expr& e, Lookup&& lookup) {
  return std::visit([&](const auto& n) -> bool {
    using N = std::decay_t<decltype(n)>;
    if constexpr (std::is_same_v<N, StartsWith>) {
      return operand_value(n.subject, lookup).starts_with(n.prefix);
    } else if constexpr (std::is_same_v<N, Compare>) {
      return (operand_value(n.lhs, lookup) == n.literal) != n.negated;
    } else if constexpr (std::is_same_v<N, Membership>) {
      const auto v = operand_value(n.lhs, lookup);
      bool found = false;
      for (const auto& candidate : n.values) {
        if (candidate == v) {
          found = true;
          break;
        }
      }
      return found != n.negated;
    } else if constexpr (std::is_same_v<N, Conjunction>) {
      for (const auto& t : n.terms) {
        if (!eval(*t, lookup)) return false;
      }
      return true;
    } else {
      return !eval(*n.antecedent, lookup) || eval(*n.consequent, lookup);
    }
  }, e.node);
}

inline bool message_satisfies(const Rule& rule, const CancerMessage& msg) {
  for (const auto& f : rule.requiredFields) {
    if (!msg.get(f)) return false;
  }
  return eval(*rule.expr, [&](std::string_view name) { return *msg.get(name); });
}

}  // namespace detail

/// Aggregation rule against a whole case: satisfied iff every message of the
/// case satisfies the expression (vacuously true for an empty case). A message
/// lacking a referenced field does not satisfy it. Aggregation is never blocked.
inline RuleOutcome evaluate_rule(const Rule& rule, const CancerCase& c) {
  for (const auto& m : c.messages) {
    if (rule.scope != kScopeAll) {
      const auto type = m.get(field::kCancerType);
      if (!type || *type != rule.scope) continue;
    }
    if (!detail::message_satisfies(rule, m)) return Applied{false};
  }
  return Applied{true};
}

/// Validation rule against one message.
///
/// Blocking checks run in a fixed order: scope (cancerType), then the message's
/// diagnosedato (must be present and YYYY-MM-DD shaped; every validation rule is
/// dated against it), then each field the expression references.
inline RuleOutcome evaluate_rule(const Rule& rule, const CancerMessage& msg) {
  if (rule.kind == RuleKind::Aggregation) return evaluate_rule(rule, CancerCase{{}, {}, {msg}});
  if (rule.scope != kScopeAll) {
    const auto type = msg.get(field::kCancerType);
    if (!type || *type != rule.scope) return NotApplied{std::string(field::kCancerType)};
  }
  const auto date = msg.get(field::kDiagnosedato);
  if (!date || !is_date_format_valid(*date)) return NotApplied{std::string(field::kDiagnosedato)};
  for (const auto& f : rule.requiredFields) {
    if (!msg.get(f)) return NotApplied{f};
  }
  return Applied{detail::eval(*rule.expr, [&](std::string_view name) { return *msg.get(name); })};
}

}  // namespace evoclass::rules
