#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>
#include <string>
#include <string_view>
#include <utility>

#include <json.hpp>

#include "evoclass/core/date.hpp"
#include "evoclass/core/hash.hpp"
#include "evoclass/rules/ruleset.hpp"

namespace evoclass::registry {

using json = nlohmann::json;

inline constexpr std::string_view kValidationPath = "/api/messages/validation";
inline constexpr std::string_view kAggregationPath = "/api/messages/aggregation";
inline constexpr std::string_view kLoginPath = "/login";

struct ApiRequest {
  std::string method = "POST";
  std::string path;
  std::map<std::string, std::string> headers;
  std::string body;
};

struct ApiResponse {
  int statusCode = 500;
  json body;
  std::map<std::string, std::string> headers;

  std::string body_text() const { return body.dump(); }
};

struct CounterSnapshot {
  std::uint64_t totalHits = 0;
  std::uint64_t applied = 0;
  std::uint64_t notApplied = 0;
  friend bool operator==(const CounterSnapshot&, const CounterSnapshot&) = default;
};

struct ServiceConfig {
  std::string versionId = "v1";
  rules::Environment environment = rules::Environment::Dev;
  std::string authToken = "evoclass-dev-token";
};

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline constexpr std::string_view kStringFields[] = {
    rules::field::kMeldingstype, rules::field::kTopografi,    rules::field::kMetastase,
    rules::field::kEkstralokalisasjon, rules::field::kDiagnosedato, rules::field::kCancerType};

inline void check_date_shape(std::string_view what, std::string_view value) {
  if (!is_date_format_valid(value)) {
    throw rules::ServerFault(std::string(what) + " has an unparseable date: " + std::string(value));
  }
  if (!is_calendar_date(value)) throw rules::ServerFault(std::string(what) + " is not a calendar date");
}

// Known payload fields must be strings; anything else is a type confusion the
// backend does not survive. Unknown keys are carried along untouched.
inline rules::CancerMessage parse_message(const json& j) {
  if (!j.is_object()) throw rules::ServerFault("cancer message is not an object");
  rules::CancerMessage m;
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto f : kStringFields) known = known || key == f;
    if (value.is_string()) {
      m.set(key, value.get<std::string>());
    } else if (known && !value.is_null()) {
      throw rules::ServerFault("field '" + key + "' has type " + value.type_name() + ", expected string");
    }
  }
  if (auto date = m.get(rules::field::kDiagnosedato)) check_date_shape("cancerMessage.diagnosedato", *date);
  return m;
}

inline std::vector<rules::CancerMessage> parse_message_list(const json& j) {
  if (!j.is_array()) throw rules::ServerFault("cancerMessages is not an array");
  std::vector<rules::CancerMessage> out;
  out.reserve(j.size());
  for (const auto& item : j) out.push_back(parse_message(item));
  return out;
}

inline json rule_message(const std::string& ruleId, const rules::RuleOutcome& outcome) {
  json m = {{"ruleId", ruleId}, {"text", rules::outcome_text(outcome)}};
  if (const auto* a = std::get_if<rules::Applied>(&outcome)) {
    m["outcome"] = "applied";
    m["satisfied"] = a->satisfied;
  } else {
    m["outcome"] = "notApplied";
    m["blockingField"] = std::get<rules::NotApplied>(outcome).blockingField;
  }
  return m;
}

}  // namespace detail

/// The simulated registry backend. Rule sets are immutable after construction;
/// request handling is thread-safe.
class RegistryService {
 public:
  RegistryService(std::shared_ptr<const rules::RuleSet> ruleset, ServiceConfig config)
      : ruleset_(std::move(ruleset)), config_(std::move(config)) {
    if (!ruleset_) throw std::invalid_argument("RegistryService: null rule set");
    if (ruleset_->versionId != config_.versionId || ruleset_->environment != config_.environment) {
      throw std::invalid_argument("RegistryService: rule set does not match the configured version/environment");
    }
  }

  const ServiceConfig& config() const noexcept { return config_; }
  const rules::RuleSet& ruleset() const noexcept { return *ruleset_; }

  ApiResponse handle(const ApiRequest& request) {
    if (!authorized(request)) return redirect_to_login();
    if (request.path == kValidationPath) return handle_validation(request);
    if (request.path == kAggregationPath) return handle_aggregation(request);
    return fault(request, "no handler for " + request.path);
  }

  ApiResponse handle_validation(const ApiRequest& request) {
    if (!authorized(request)) return redirect_to_login();
    std::vector<rules::CancerMessage> messages;
    json payload;
    try {
      payload = json::parse(request.body);
      if (payload.is_object() && payload.contains("cancerMessages")) {
        messages = detail::parse_message_list(payload["cancerMessages"]);
      } else {
        messages.push_back(detail::parse_message(payload));
      }
    } catch (const json::exception& e) {
      return fault(request, e.what());
    } catch (const rules::ServerFault& e) {
      return fault(request, e.what());
    }

    json ruleMessages = json::array();
    std::uint64_t applied = 0;
    std::uint64_t notApplied = 0;
    for (std::size_t i = 0; i < messages.size(); ++i) {
      for (const auto& [ruleId, outcome] : rules::validate_message(*ruleset_, messages[i])) {
        (rules::is_applied(outcome) ? applied : notApplied) += 1;
        json m = detail::rule_message(ruleId, outcome);
        m["messageIndex"] = i;
        ruleMessages.push_back(std::move(m));
      }
    }
    record(applied, notApplied);
    return ApiResponse{200, json{{"ruleMessages", std::move(ruleMessages)}, {"validated", std::move(payload)}}, {}};
  }

  ApiResponse handle_aggregation(const ApiRequest& request) {
    if (!authorized(request)) return redirect_to_login();
    rules::CancerCase c;
    json payload;
    try {
      payload = json::parse(request.body);
      if (!payload.is_object() || !payload.contains("cancerCase")) throw rules::ServerFault("missing cancerCase");
      const json& jc = payload["cancerCase"];
      if (!jc.is_object()) throw rules::ServerFault("cancerCase is not an object");
      if (jc.contains("caseId")) {
        if (!jc["caseId"].is_string()) throw rules::ServerFault("caseId has wrong type");
        c.caseId = jc["caseId"].get<std::string>();
      }
      if (jc.contains("diagnosedato") && !jc["diagnosedato"].is_null()) {
        if (!jc["diagnosedato"].is_string()) throw rules::ServerFault("cancerCase.diagnosedato has wrong type");
        c.diagnosedato = jc["diagnosedato"].get<std::string>();
        if (!is_date_format_valid(*c.diagnosedato)) throw rules::ServerFault("cancerCase.diagnosedato unparseable");
      }
      if (jc.contains("cancerMessages")) c.messages = detail::parse_message_list(jc["cancerMessages"]);
    } catch (const json::exception& e) {
      return fault(request, e.what());
    } catch (const rules::ServerFault& e) {
      return fault(request, e.what());
    }

    try {
      auto [agg, outcomes] = rules::aggregate_case(*ruleset_, c);
      json ruleMessages = json::array();
      for (const auto& [ruleId, outcome] : outcomes) ruleMessages.push_back(detail::rule_message(ruleId, outcome));
      std::size_t satisfied = 0;
      for (const auto& [id, ok] : agg.satisfied) satisfied += ok ? 1 : 0;
      record(outcomes.size(), 0);
      return ApiResponse{200,
                         json{{"ruleMessages", std::move(ruleMessages)},
                              {"aggregated",
                               {{"caseId", agg.caseId},
                                {"messageCount", agg.messageCount},
                                {"satisfiedRules", satisfied}}}},
                         {}};
    } catch (const rules::ServerFault& e) {
      return fault(request, e.what());
    }
  }

  CounterSnapshot snapshot_counters() const {
    std::lock_guard lock(counterMutex_);
    return counters_;
  }

 private:
  bool authorized(const ApiRequest& request) const {
    for (const auto& [key, value] : request.headers) {
      if (detail::lower(key) == "authorization") return value == "Bearer " + config_.authToken;
    }
    return false;
  }

  static ApiResponse redirect_to_login() {
    return ApiResponse{302,
                       json{{"redirect", std::string(kLoginPath)}, {"message", "authentication required"}},
                       {{"Location", std::string(kLoginPath)}}};
  }

  // The error id is derived from the request so identical inputs yield identical responses.
  static ApiResponse fault(const ApiRequest& request, std::string_view) {
    const auto id = fnv1a(request.body, fnv1a(request.path));
    return ApiResponse{500, json{{"errorId", to_hex(id)}}, {}};
  }

  void record(std::uint64_t applied, std::uint64_t notApplied) {
    std::lock_guard lock(counterMutex_);
    counters_.applied += applied;
    counters_.notApplied += notApplied;
    counters_.totalHits += applied + notApplied;
  }

  std::shared_ptr<const rules::RuleSet> ruleset_;
  ServiceConfig config_;
  mutable std::mutex counterMutex_;
  CounterSnapshot counters_;
};

}  // namespace evoclass::registry
