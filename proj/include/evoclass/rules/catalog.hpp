#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "evoclass/core/random.hpp"
#include "evoclass/rules/ruleset.hpp"

namespace evoclass::rules {

struct VersionInfo {
  std::string_view id;
  std::string_view date;
  std::size_t validation;
  std::size_t aggregation;
};

// Rule counts of the ten registry releases.
inline constexpr std::array<VersionInfo, 10> kVersions{{
    {"v1", "12/2017", 30, 32},
    {"v2", "05/2018", 31, 33},
    {"v3", "02/2019", 48, 35},
    {"v4", "08/2019", 49, 35},
    {"v5", "11/2019", 53, 37},
    {"v6", "09/2020", 56, 37},
    {"v7", "11/2020", 66, 38},
    {"v8", "04/2021", 69, 43},
    {"v9", "01/2022", 69, 43},
    {"v10", "01/2022", 70, 43},
}};

inline std::size_t version_index(std::string_view id) {
  for (std::size_t i = 0; i < kVersions.size(); ++i) {
    if (kVersions[i].id == id) return i;
  }
  throw std::invalid_argument("unknown version '" + std::string(id) + "' (expected v1..v10)");
}

enum class ChangeType { Insert, Modify, Delete };

inline std::string_view to_string(ChangeType c) {
  switch (c) {
    case ChangeType::Insert: return "insert";
    case ChangeType::Modify: return "modify";
    case ChangeType::Delete: return "delete";
  }
  return "modify";
}

/// One rule-level difference between two rule sets. Version deltas keep the
/// environment fixed; environment deltas keep the version fixed.
struct CatalogDelta {
  ChangeType changeType = ChangeType::Modify;
  std::string targetRuleId;
  RuleKind kind = RuleKind::Validation;
  std::string versionFrom;
  std::string versionTo;
  Environment envFrom = Environment::Dev;
  Environment envTo = Environment::Dev;
  std::string description;
  // Rule after the change; empty for deletions.
  std::string scope;
  std::string ruleText;
};

struct Catalog {
  std::map<std::pair<std::size_t, Environment>, RuleSet> sets;
  std::vector<CatalogDelta> deltas;

  const RuleSet& at(std::string_view version, Environment env) const {
    return sets.at({version_index(version), env});
  }
};

namespace detail {

struct Atom {
  enum class Op { StartsWith, Eq, Ne, In, NotIn };
  std::string operand;  // "Topografi" or "Topografi ->substring(1,2)"
  Op op = Op::Eq;
  std::vector<std::string> values;

  std::string text() const {
    switch (op) {
      case Op::StartsWith: return operand + " ->startswith('" + values.front() + "')";
      case Op::Eq: return operand + " = '" + values.front() + "'";
      case Op::Ne: return operand + " != '" + values.front() + "'";
      case Op::In:
      case Op::NotIn: {
        std::string s = operand + (op == Op::In ? " in [" : " notIn [");
        for (std::size_t i = 0; i < values.size(); ++i) s += (i ? ", '" : "'") + values[i] + "'";
        return s + "]";
      }
    }
    return {};
  }
  bool is_list() const { return op == Op::In || op == Op::NotIn; }
};

struct Body {
  std::vector<Atom> antecedent;
  std::optional<Atom> consequent;  // validation rules only

  std::string text() const {
    std::string lhs;
    for (std::size_t i = 0; i < antecedent.size(); ++i) lhs += (i ? " and " : "") + antecedent[i].text();
    if (!consequent) return lhs;
    if (antecedent.size() > 1) lhs = "(" + lhs + ")";
    return lhs + " implies " + consequent->text();
  }
};

struct Spec {
  std::string ruleId;
  RuleKind kind = RuleKind::Validation;
  std::string scope;
  Body body;
  bool pinned = false;  // never churned by the generator
};

inline const std::vector<std::string> kTopografi = {"500", "501", "502", "504", "508", "509", "340", "341", "343", "349",
                                                    "619", "180", "182", "184", "187", "189", "481", "482", "488", "569",
                                                    "570", "579", "440", "441", "770"};
inline const std::vector<std::string> kTopografiPrefix = {"50", "34", "61", "18", "51", "52", "53", "54",
                                                          "55", "56", "48", "57", "44", "77"};
inline const std::vector<std::string> kMetastase = {"0", "1", "5", "6", "7", "8", "9", "A", "B", "C", "D"};
inline const std::vector<std::string> kMeldingstype = {"K", "M", "D", "H", "S"};
inline const std::vector<std::string> kEkstralokalisasjon = {"7777", "0000", "1111", "5555", "9999"};
inline const std::vector<std::string> kCancerTypes = {"Breast", "Lung", "Prostate", "Colon"};

inline std::vector<std::string> sample_distinct(Rng& rng, const std::vector<std::string>& pool, std::size_t k) {
  std::vector<std::string> copy = pool;
  rng.shuffle(copy);
  copy.resize(std::min(k, copy.size()));
  return copy;
}

inline Atom random_condition(Rng& rng) {
  using Op = Atom::Op;
  switch (rng.below(5)) {
    case 0: return {"Topografi", Op::StartsWith, {rng.pick(kTopografiPrefix)}};
    case 1: return {"Meldingstype", Op::Eq, {rng.pick(kMeldingstype)}};
    case 2: return {"Topografi", Op::NotIn, sample_distinct(rng, kTopografi, 2 + rng.below(3))};
    case 3: return {"Topografi ->substring(1,2)", Op::NotIn, sample_distinct(rng, kTopografiPrefix, 2 + rng.below(4))};
    default: return {"Ekstralokalisasjon", Op::Ne, {rng.pick(kEkstralokalisasjon)}};
  }
}

inline Atom random_consequent(Rng& rng) {
  using Op = Atom::Op;
  switch (rng.below(4)) {
    case 0: return {"Metastase", Op::In, sample_distinct(rng, kMetastase, 3 + rng.below(5))};
    case 1: return {"Metastase", Op::Ne, {rng.pick(kMetastase)}};
    case 2: return {"Meldingstype", Op::In, sample_distinct(rng, kMeldingstype, 2 + rng.below(3))};
    default: return {"Topografi ->substring(1,2)", Op::In, sample_distinct(rng, kTopografiPrefix, 3 + rng.below(5))};
  }
}

inline Atom random_aggregation_atom(Rng& rng) {
  using Op = Atom::Op;
  switch (rng.below(5)) {
    case 0: return {"Meldingstype", Op::In, sample_distinct(rng, kMeldingstype, 3 + rng.below(3))};
    case 1: return {"Metastase", Op::Ne, {rng.pick(kMetastase)}};
    case 2: return {"Topografi ->substring(1,1)", Op::NotIn, {std::to_string(rng.below(10))}};
    case 3: return {"Ekstralokalisasjon", Op::NotIn, sample_distinct(rng, kEkstralokalisasjon, 1 + rng.below(2))};
    default: return {"CancerType", Op::In, sample_distinct(rng, kCancerTypes, 2 + rng.below(3))};
  }
}

inline Body random_body(Rng& rng, RuleKind kind) {
  Body b;
  const std::size_t atoms = 1 + rng.below(kind == RuleKind::Validation ? 3 : 2);
  for (std::size_t i = 0; i < atoms; ++i) {
    b.antecedent.push_back(kind == RuleKind::Validation ? random_condition(rng) : random_aggregation_atom(rng));
  }
  if (kind == RuleKind::Validation) b.consequent = random_consequent(rng);
  return b;
}

// Partial modifications of the kind seen between environments and releases:
// a constraint added or removed, a value list extended or shrunk.
inline std::string modify_body(Rng& rng, Body& b, RuleKind kind) {
  std::vector<Atom*> lists;
  for (auto& a : b.antecedent) {
    if (a.is_list()) lists.push_back(&a);
  }
  if (b.consequent && b.consequent->is_list()) lists.push_back(&*b.consequent);

  for (int attempt = 0; attempt < 8; ++attempt) {
    switch (rng.below(4)) {
      case 0:
        b.antecedent.push_back(kind == RuleKind::Validation ? random_condition(rng) : random_aggregation_atom(rng));
        return "constraint added";
      case 1:
        if (b.antecedent.size() > 1) {
          b.antecedent.erase(b.antecedent.begin() + static_cast<std::ptrdiff_t>(rng.below(b.antecedent.size())));
          return "constraint removed";
        }
        break;
      case 2:
        if (!lists.empty()) {
          Atom* a = lists[rng.below(lists.size())];
          a->values.push_back(std::to_string(100 + rng.below(900)));
          return "list extended";
        }
        break;
      default:
        if (!lists.empty()) {
          Atom* a = lists[rng.below(lists.size())];
          if (a->values.size() > 1) {
            a->values.pop_back();
            return "list shrunk";
          }
        }
        break;
    }
  }
  b.antecedent.push_back(kind == RuleKind::Validation ? random_condition(rng) : random_aggregation_atom(rng));
  return "constraint added";
}

inline Body breast_r03(bool withExtraConstraint) {
  using Op = Atom::Op;
  Body b;
  b.antecedent.push_back({"Topografi", Op::StartsWith, {"50"}});
  if (withExtraConstraint) b.antecedent.push_back({"Ekstralokalisasjon", Op::Ne, {"7777"}});
  b.consequent = Atom{"Metastase", Op::In, {"0", "A", "B", "C", "D", "9"}};
  return b;
}

inline Body all_r40(bool prodVariant) {
  using Op = Atom::Op;
  Body b;
  b.antecedent.push_back({"Meldingstype", Op::Eq, {"K"}});
  if (prodVariant) {
    b.antecedent.push_back({"Topografi", Op::NotIn, {"481", "482", "488", "570", "569", "579", "619"}});
    b.antecedent.push_back({"Topografi ->substring(1,2)", Op::NotIn, {"51", "52", "53", "54", "55"}});
  } else {
    b.antecedent.push_back({"Topografi", Op::NotIn, {"481", "482", "570", "579"}});
    b.antecedent.push_back({"Topografi ->substring(1,2)", Op::NotIn, {"51", "52", "53", "54", "55", "56", "61"}});
  }
  b.consequent = Atom{"Metastase", Op::Ne, {"5"}};
  return b;
}

inline std::string rule_id(RuleKind kind, int n) {
  std::string digits = std::to_string(n);
  if (digits.size() < 2) digits = "0" + digits;
  return (kind == RuleKind::Validation ? "R" : "A") + digits;
}

inline Rule to_rule(const Spec& s) { return parse_rule(s.body.text(), s.ruleId, s.kind, s.scope); }

inline std::vector<CatalogDelta> diff_rules(const std::vector<Rule>& from, const std::vector<Rule>& to, RuleKind kind) {
  std::map<std::string, const Rule*> before;
  std::map<std::string, const Rule*> after;
  for (const auto& r : from) before[r.ruleId] = &r;
  for (const auto& r : to) after[r.ruleId] = &r;
  std::vector<CatalogDelta> out;
  for (const auto& r : from) {
    if (!after.count(r.ruleId)) {
      CatalogDelta d;
      d.changeType = ChangeType::Delete;
      d.targetRuleId = r.ruleId;
      d.kind = kind;
      d.description = "rule deleted";
      out.push_back(std::move(d));
    }
  }
  for (const auto& r : to) {
    auto it = before.find(r.ruleId);
    if (it == before.end() || it->second->text() != r.text() || it->second->scope != r.scope) {
      CatalogDelta d;
      d.changeType = it == before.end() ? ChangeType::Insert : ChangeType::Modify;
      d.targetRuleId = r.ruleId;
      d.kind = kind;
      d.description = it == before.end() ? "rule inserted" : "rule modified";
      d.scope = r.scope;
      d.ruleText = r.text();
      out.push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<CatalogDelta> diff_rulesets(const RuleSet& from, const RuleSet& to) {
  auto out = detail::diff_rules(from.validationRules, to.validationRules, RuleKind::Validation);
  auto agg = detail::diff_rules(from.aggregationRules, to.aggregationRules, RuleKind::Aggregation);
  out.insert(out.end(), agg.begin(), agg.end());
  for (auto& d : out) {
    d.versionFrom = from.versionId;
    d.versionTo = to.versionId;
    d.envFrom = from.environment;
    d.envTo = to.environment;
  }
  return out;
}

/// Applies deltas to `base`. Deleted rules are removed, modified rules are
/// replaced in place, inserted rules are appended in delta order.
inline RuleSet apply_deltas(const RuleSet& base, const std::vector<CatalogDelta>& deltas, std::string versionId,
                            Environment env) {
  RuleSet out{std::move(versionId), env, base.validationRules, base.aggregationRules};
  for (const auto& d : deltas) {
    auto& rules = d.kind == RuleKind::Validation ? out.validationRules : out.aggregationRules;
    auto it = std::find_if(rules.begin(), rules.end(), [&](const Rule& r) { return r.ruleId == d.targetRuleId; });
    switch (d.changeType) {
      case ChangeType::Delete:
        if (it != rules.end()) rules.erase(it);
        break;
      case ChangeType::Modify:
        if (it != rules.end()) *it = parse_rule(d.ruleText, d.targetRuleId, d.kind, d.scope);
        break;
      case ChangeType::Insert:
        rules.push_back(parse_rule(d.ruleText, d.targetRuleId, d.kind, d.scope));
        break;
    }
  }
  return out;
}

/// Builds the ten-release, three-environment rule catalog. Rule counts follow
/// kVersions exactly in every environment; bodies are synthetic. Deterministic in `seed`.
inline Catalog generate_catalog(std::uint64_t seed) {
  using detail::Spec;
  Rng rng(seed);
  Catalog catalog;

  std::vector<Spec> validation;
  std::vector<Spec> aggregation;
  int nextValidation = 1;
  int nextAggregation = 1;

  auto new_spec = [&](RuleKind kind) {
    Spec s;
    s.kind = kind;
    if (kind == RuleKind::Validation) {
      const int n = nextValidation++;
      s.ruleId = detail::rule_id(kind, n);
      if (n == 3) {
        s.scope = "Breast";
        s.body = detail::breast_r03(true);
        s.pinned = true;
        return s;
      }
      if (n == 40) {
        s.scope = std::string(kScopeAll);
        s.body = detail::all_r40(false);
        s.pinned = true;
        return s;
      }
      s.scope = rng.bernoulli(0.65) ? rng.pick(detail::kCancerTypes) : std::string(kScopeAll);
    } else {
      s.ruleId = detail::rule_id(kind, nextAggregation++);
      s.scope = std::string(kScopeAll);
    }
    s.body = detail::random_body(rng, kind);
    return s;
  };

  // Release lineage (development bodies); environment variants are derived per release.
  std::vector<std::pair<std::vector<Spec>, std::vector<Spec>>> lineage;
  for (std::size_t v = 0; v < kVersions.size(); ++v) {
    if (v == 0) {
      for (std::size_t i = 0; i < kVersions[0].validation; ++i) validation.push_back(new_spec(RuleKind::Validation));
      for (std::size_t i = 0; i < kVersions[0].aggregation; ++i) aggregation.push_back(new_spec(RuleKind::Aggregation));
    } else {
      auto evolve = [&](std::vector<Spec>& rules, std::size_t target, RuleKind kind) {
        std::size_t deletes = rng.below(3);
        while (rules.size() - deletes > target) ++deletes;
        for (std::size_t i = 0; i < deletes; ++i) {
          std::vector<std::size_t> candidates;
          for (std::size_t j = 0; j < rules.size(); ++j) {
            if (!rules[j].pinned) candidates.push_back(j);
          }
          rules.erase(rules.begin() + static_cast<std::ptrdiff_t>(candidates[rng.below(candidates.size())]));
        }
        const std::size_t modifies = 1 + rng.below(3);
        for (std::size_t i = 0; i < modifies; ++i) {
          std::vector<std::size_t> candidates;
          for (std::size_t j = 0; j < rules.size(); ++j) {
            if (!rules[j].pinned) candidates.push_back(j);
          }
          auto& s = rules[candidates[rng.below(candidates.size())]];
          detail::modify_body(rng, s.body, kind);
        }
        while (rules.size() < target) rules.push_back(new_spec(kind));
      };
      evolve(validation, kVersions[v].validation, RuleKind::Validation);
      evolve(aggregation, kVersions[v].aggregation, RuleKind::Aggregation);
    }
    lineage.emplace_back(validation, aggregation);
  }

  for (std::size_t v = 0; v < kVersions.size(); ++v) {
    for (Environment env : kEnvironments) {
      auto [val, agg] = lineage[v];
      if (env != Environment::Dev) {
        // A couple of environment-specific partial edits per release.
        const std::size_t edits = 1 + rng.below(2);
        for (std::size_t i = 0; i < edits; ++i) {
          const bool onValidation = rng.bernoulli(0.7);
          auto& pool = onValidation ? val : agg;
          auto& s = pool[rng.below(pool.size())];
          if (!s.pinned) detail::modify_body(rng, s.body, s.kind);
        }
        for (auto& s : val) {
          if (s.ruleId == "R03" && env == Environment::Prod) s.body = detail::breast_r03(false);
          if (s.ruleId == "R40" && env == Environment::Prod) s.body = detail::all_r40(true);
        }
      }
      RuleSet rs;
      rs.versionId = std::string(kVersions[v].id);
      rs.environment = env;
      for (const auto& s : val) rs.validationRules.push_back(detail::to_rule(s));
      for (const auto& s : agg) rs.aggregationRules.push_back(detail::to_rule(s));
      catalog.sets.emplace(std::pair{v, env}, std::move(rs));
    }
  }

  for (std::size_t v = 1; v < kVersions.size(); ++v) {
    for (Environment env : kEnvironments) {
      auto d = diff_rulesets(catalog.sets.at({v - 1, env}), catalog.sets.at({v, env}));
      catalog.deltas.insert(catalog.deltas.end(), d.begin(), d.end());
    }
  }
  for (std::size_t v = 0; v < kVersions.size(); ++v) {
    for (auto [a, b] : {std::pair{Environment::Dev, Environment::Test}, std::pair{Environment::Test, Environment::Prod}}) {
      auto d = diff_rulesets(catalog.sets.at({v, a}), catalog.sets.at({v, b}));
      catalog.deltas.insert(catalog.deltas.end(), d.begin(), d.end());
    }
  }
  return catalog;
}

// --- text formats --------------------------------------------------------

// One rule per line: ruleId|kind|scope|rule text
inline std::string serialize_ruleset(const RuleSet& rs) {
  std::string out;
  for (const auto* rules : {&rs.validationRules, &rs.aggregationRules}) {
    for (const auto& r : *rules) {
      out += r.ruleId + "|" + std::string(to_string(r.kind)) + "|" + r.scope + "|" + r.text() + "\n";
    }
  }
  return out;
}

inline RuleSet parse_ruleset(std::string_view text, std::string versionId, Environment env) {
  RuleSet rs{std::move(versionId), env, {}, {}};
  std::size_t lineNo = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineNo;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    std::array<std::string_view, 3> head;
    std::size_t start = 0;
    for (auto& part : head) {
      const std::size_t bar = line.find('|', start);
      if (bar == std::string_view::npos) {
        throw std::runtime_error("rule file line " + std::to_string(lineNo) + ": expected ruleId|kind|scope|rule");
      }
      part = line.substr(start, bar - start);
      start = bar + 1;
    }
    const RuleKind kind = parse_rule_kind(head[1]);
    auto rule = parse_rule(line.substr(start), std::string(head[0]), kind, std::string(head[2]));
    (kind == RuleKind::Validation ? rs.validationRules : rs.aggregationRules).push_back(std::move(rule));
  }
  return rs;
}

inline std::string serialize_deltas(const std::vector<CatalogDelta>& deltas) {
  std::string out = "version_from,version_to,env,change_type,rule_id\n";
  for (const auto& d : deltas) {
    std::string env(to_string(d.envFrom));
    if (d.envFrom != d.envTo) env += "->" + std::string(to_string(d.envTo));
    out += d.versionFrom + "," + d.versionTo + "," + env + "," + std::string(to_string(d.changeType)) + "," +
           d.targetRuleId + "\n";
  }
  return out;
}

inline std::string ruleset_filename(std::string_view version, Environment env) {
  return std::string(version) + "_" + std::string(to_string(env)) + ".rules";
}

inline void write_catalog(const Catalog& catalog, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [key, rs] : catalog.sets) {
    std::ofstream(dir / ruleset_filename(rs.versionId, rs.environment), std::ios::binary) << serialize_ruleset(rs);
  }
  std::ofstream(dir / "deltas.csv", std::ios::binary) << serialize_deltas(catalog.deltas);
}

inline RuleSet read_ruleset(const std::filesystem::path& dir, std::string_view version, Environment env) {
  std::ifstream in(dir / ruleset_filename(version, env), std::ios::binary);
  if (!in) throw std::runtime_error("cannot open rule file " + (dir / ruleset_filename(version, env)).string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ruleset(ss.str(), std::string(version), env);
}

}  // namespace evoclass::rules
