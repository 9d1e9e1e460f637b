#pragma once

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evoclass/core/date.hpp"
#include "evoclass/core/random.hpp"
#include "evoclass/generator/schema.hpp"
#include "evoclass/registry/transport.hpp"

namespace evoclass::generator {

using json = nlohmann::json;

enum class Corruption { None, NoAuth, FormatInvalidDate, CalendarInvalid, TypeConfusion, WrongEnum };

inline std::string_view to_string(Corruption c) {
  switch (c) {
    case Corruption::None: return "none";
    case Corruption::NoAuth: return "no_auth";
    case Corruption::FormatInvalidDate: return "format_invalid_date";
    case Corruption::CalendarInvalid: return "calendar_invalid";
    case Corruption::TypeConfusion: return "type_confusion";
    case Corruption::WrongEnum: return "wrong_enum";
  }
  return "none";
}

struct CorruptionMix {
  double noAuth = 0.0;
  double formatInvalidDate = 0.0;
  double calendarInvalid = 0.0;
  double typeConfusion = 0.0;
  double wrongEnum = 0.0;

  double total() const { return noAuth + formatInvalidDate + calendarInvalid + typeConfusion + wrongEnum; }
};

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::size_t budget = 1000;
  CorruptionMix mix;
  int minMessages = 1;
  int maxMessages = 3;
  // Overrides FieldSpec::presence for message fields, keyed by field name.
  std::map<std::string, double> messagePresence;

  void validate() const {
    for (double p : {mix.noAuth, mix.formatInvalidDate, mix.calendarInvalid, mix.typeConfusion, mix.wrongEnum}) {
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("GeneratorConfig: probability outside [0,1]");
    }
    if (mix.total() > 1.0 + 1e-12) throw std::invalid_argument("GeneratorConfig: corruption probabilities sum above 1");
    if (budget < 1) throw std::invalid_argument("GeneratorConfig: budget must be at least 1");
    if (minMessages < 1 || maxMessages < minMessages) {
      throw std::invalid_argument("GeneratorConfig: messagesPerRequest range is empty");
    }
    for (const auto& [name, p] : messagePresence) {
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("GeneratorConfig: presence for " + name + " outside [0,1]");
    }
  }
};

inline void to_json(json& j, const GeneratorConfig& c) {
  j = json{{"seed", c.seed},
           {"budget", c.budget},
           {"mix",
            {{"p_no_auth", c.mix.noAuth},
             {"p_format_invalid_date", c.mix.formatInvalidDate},
             {"p_calendar_invalid", c.mix.calendarInvalid},
             {"p_type_confusion", c.mix.typeConfusion},
             {"p_wrong_enum", c.mix.wrongEnum}}},
           {"messagesPerRequest", {c.minMessages, c.maxMessages}},
           {"messagePresence", c.messagePresence}};
}

inline void from_json(const json& j, GeneratorConfig& c) {
  c = GeneratorConfig{};
  c.seed = j.value("seed", c.seed);
  c.budget = j.value("budget", c.budget);
  if (j.contains("mix")) {
    const auto& m = j.at("mix");
    c.mix.noAuth = m.value("p_no_auth", 0.0);
    c.mix.formatInvalidDate = m.value("p_format_invalid_date", 0.0);
    c.mix.calendarInvalid = m.value("p_calendar_invalid", 0.0);
    c.mix.typeConfusion = m.value("p_type_confusion", 0.0);
    c.mix.wrongEnum = m.value("p_wrong_enum", 0.0);
  }
  if (j.contains("messagesPerRequest")) {
    const auto& r = j.at("messagesPerRequest");
    c.minMessages = r.at(0).get<int>();
    c.maxMessages = r.at(1).get<int>();
  }
  if (j.contains("messagePresence")) c.messagePresence = j.at("messagePresence").get<std::map<std::string, double>>();
  c.validate();
}

struct GeneratedRequest {
  std::size_t index = 0;
  std::string endpoint;
  std::string method = "POST";
  bool authPresent = true;
  std::string user;
  json body;
  Corruption corruption = Corruption::None;
  json generatorInternals = json::object();
};

namespace detail {

inline std::string format_date(int y, int m, int d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return buf;
}

inline std::string valid_date(Rng& rng) {
  const int y = static_cast<int>(rng.between(2010, 2023));
  const int m = static_cast<int>(rng.between(1, 12));
  return format_date(y, m, static_cast<int>(rng.between(1, days_in_month(y, m))));
}

// Right shape, impossible day.
inline std::string calendar_invalid_date(Rng& rng) {
  const int y = static_cast<int>(rng.between(2010, 2023));
  switch (rng.below(3)) {
    case 0: return format_date(y, rng.bernoulli(0.2) ? 0 : static_cast<int>(rng.between(13, 19)),
                               static_cast<int>(rng.between(1, 28)));
    case 1: return format_date(y, static_cast<int>(rng.between(1, 12)), 0);
    default: {
      const int m = static_cast<int>(rng.between(1, 12));
      const int dim = days_in_month(y, m);
      return format_date(y, m, static_cast<int>(rng.between(dim + 1, dim == 31 ? 39 : 31)));
    }
  }
}

inline std::string format_invalid_date(Rng& rng) {
  const int y = static_cast<int>(rng.between(2010, 2023));
  const int m = static_cast<int>(rng.between(1, 12));
  const int d = static_cast<int>(rng.between(1, 28));
  char buf[32];
  switch (rng.below(7)) {
    case 0: std::snprintf(buf, sizeof buf, "%02d/%04d", m, y); break;
    case 1: std::snprintf(buf, sizeof buf, "%04d%02d%02d", y, m, d); break;
    case 2: std::snprintf(buf, sizeof buf, "%02d.%02d.%04d", d, m, y); break;
    case 3: std::snprintf(buf, sizeof buf, "%04d/%02d/%02d", y, m, d); break;
    case 4: std::snprintf(buf, sizeof buf, "%04d-%d-%02d", y, m % 9 + 1, d); break;  // unpadded month
    case 5: std::snprintf(buf, sizeof buf, "%04d-%02d", y, m); break;
    default: return "unknown";
  }
  return buf;
}

inline std::string digits(Rng& rng, int length) {
  std::string s;
  for (int i = 0; i < length; ++i) s += static_cast<char>('0' + rng.below(10));
  return s;
}

inline json valid_value(Rng& rng, const FieldSpec& f) {
  switch (f.type) {
    case SemanticType::Enum: return rng.pick(f.values);
    case SemanticType::Date: return valid_date(rng);
    case SemanticType::DigitString: {
      if (!f.values.empty() && rng.bernoulli(0.5)) return rng.pick(f.values);
      return digits(rng, static_cast<int>(rng.between(f.minLength, f.maxLength)));
    }
    case SemanticType::Identifier: return "C" + digits(rng, f.maxLength - 1);
  }
  return "";
}

inline const std::vector<std::string>& wrong_enum_pool(std::string_view field) {
  static const std::vector<std::string> meldingstype = {"X", "Q", "Z", "k"};
  static const std::vector<std::string> metastase = {"2", "3", "4", "X"};
  static const std::vector<std::string> cancerType = {"Kidney", "Skin", "Liver", "Melanoma"};
  static const std::vector<std::string> other = {"?"};
  if (field == rules::field::kMeldingstype) return meldingstype;
  if (field == rules::field::kMetastase) return metastase;
  if (field == rules::field::kCancerType) return cancerType;
  return other;
}

inline json confused_value(Rng& rng, const json& original) {
  switch (rng.below(3)) {
    case 0: {
      const auto s = original.is_string() ? original.get<std::string>() : std::string();
      std::int64_t n = 0;
      for (char c : s) {
        if (c >= '0' && c <= '9') n = (n * 10 + (c - '0')) % 100000000;
      }
      return n;
    }
    case 1: return rng.bernoulli(0.5);
    default: return json::array({original});
  }
}

}  // namespace detail

/// Black-box request generator: payloads follow the schema's shapes, and at most
/// one corruption class is injected per request.
class RequestGenerator {
 public:
  RequestGenerator(ApiSchema schema, GeneratorConfig config) : schema_(std::move(schema)), config_(std::move(config)) {
    config_.validate();
    if (schema_.endpoints.empty()) throw std::invalid_argument("RequestGenerator: schema has no endpoints");
    if (schema_.users.empty()) schema_.users.push_back("anonymous");
  }

  const GeneratorConfig& config() const noexcept { return config_; }
  const ApiSchema& schema() const noexcept { return schema_; }

  // Pure in (seed, index).
  GeneratedRequest generate(std::size_t index) const {
    Rng rng(derive_seed(config_.seed, index));
    GeneratedRequest req;
    req.index = index;
    const auto& endpoint = schema_.endpoints[rng.below(schema_.endpoints.size())];
    req.endpoint = endpoint.path;
    req.user = rng.pick(schema_.users);
    req.corruption = draw_corruption(rng);

    const int count = static_cast<int>(rng.between(config_.minMessages, config_.maxMessages));
    json messages = json::array();
    for (int i = 0; i < count; ++i) messages.push_back(valid_message(rng));

    if (endpoint.carriesCase) {
      json c = json::object();
      for (const auto& f : schema_.caseFields) {
        if (rng.bernoulli(f.presence)) c[f.name] = detail::valid_value(rng, f);
      }
      c["cancerMessages"] = std::move(messages);
      req.body = json{{"cancerCase", std::move(c)}};
    } else {
      req.body = json{{"cancerMessages", std::move(messages)}};
    }

    inject(rng, req);
    req.generatorInternals = {{"corruption", to_string(req.corruption)},
                              {"noveltyScore", rng.uniform()},
                              {"fitness", rng.uniform()},
                              {"coveredTargets", rng.between(0, 60)}};
    return req;
  }

 private:
  Corruption draw_corruption(Rng& rng) const {
    const double u = rng.uniform();
    const auto& m = config_.mix;
    double acc = 0.0;
    const std::array<std::pair<double, Corruption>, 5> classes{{{m.noAuth, Corruption::NoAuth},
                                                                {m.formatInvalidDate, Corruption::FormatInvalidDate},
                                                                {m.calendarInvalid, Corruption::CalendarInvalid},
                                                                {m.typeConfusion, Corruption::TypeConfusion},
                                                                {m.wrongEnum, Corruption::WrongEnum}}};
    for (const auto& [p, c] : classes) {
      acc += p;
      if (u < acc) return c;
    }
    return Corruption::None;
  }

  double presence(const FieldSpec& f) const {
    auto it = config_.messagePresence.find(f.name);
    return it == config_.messagePresence.end() ? f.presence : it->second;
  }

  json valid_message(Rng& rng) const {
    json m = json::object();
    for (const auto& f : schema_.messageFields) {
      if (rng.bernoulli(presence(f))) m[f.name] = detail::valid_value(rng, f);
    }
    return m;
  }

  static json& messages_of(json& body) {
    return body.contains("cancerCase") ? body["cancerCase"]["cancerMessages"] : body["cancerMessages"];
  }

  // Pointers to every date slot in the body, whether or not it is filled.
  static std::vector<json*> date_slots(json& body, bool presentOnly) {
    std::vector<json*> out;
    const std::string key(rules::field::kDiagnosedato);
    if (body.contains("cancerCase")) {
      auto& c = body["cancerCase"];
      if (!presentOnly || c.contains(key)) out.push_back(&c);
    }
    for (auto& m : messages_of(body)) {
      if (!presentOnly || m.contains(key)) out.push_back(&m);
    }
    return out;
  }

  void inject(Rng& rng, GeneratedRequest& req) const {
    const std::string dateKey(rules::field::kDiagnosedato);
    auto& messages = messages_of(req.body);
    switch (req.corruption) {
      case Corruption::None: break;
      case Corruption::NoAuth: req.authPresent = false; break;
      case Corruption::FormatInvalidDate: {
        auto slots = date_slots(req.body, true);
        if (slots.empty()) slots = date_slots(req.body, false);
        (*slots[rng.below(slots.size())])[dateKey] = detail::format_invalid_date(rng);
        break;
      }
      case Corruption::CalendarInvalid: {
        // Message dates only: a bad case date would make every aggregation request suspect.
        std::vector<json*> slots;
        for (auto& m : messages) {
          if (m.contains(dateKey)) slots.push_back(&m);
        }
        if (slots.empty()) slots.push_back(&messages[rng.below(messages.size())]);
        (*slots[rng.below(slots.size())])[dateKey] = detail::calendar_invalid_date(rng);
        break;
      }
      case Corruption::TypeConfusion: {
        auto& m = messages[rng.below(messages.size())];
        std::vector<std::string> keys;
        for (const auto& [k, v] : m.items()) keys.push_back(k);
        if (keys.empty()) {
          m[std::string(rules::field::kCancerType)] = detail::confused_value(rng, json());
        } else {
          const auto& k = rng.pick(keys);
          m[k] = detail::confused_value(rng, m[k]);
        }
        break;
      }
      case Corruption::WrongEnum: {
        auto& m = messages[rng.below(messages.size())];
        std::vector<std::string> enums;
        for (const auto& f : schema_.messageFields) {
          if (f.type == SemanticType::Enum) enums.push_back(f.name);
        }
        if (enums.empty()) break;
        const auto& k = rng.pick(enums);
        m[k] = rng.pick(detail::wrong_enum_pool(k));
        break;
      }
    }
  }

  ApiSchema schema_;
  GeneratorConfig config_;
};

/// Labels attached to every record of a run and the credential the client presents.
struct ExecutionContext {
  std::string environment = "dev";
  std::string versionId = "v1";
  std::string authToken = "evoclass-dev-token";
  std::string runId = "run";
};

struct RequestRecord {
  std::string requestId;
  std::string endpoint;
  std::string method = "POST";
  bool authPresent = true;
  std::string user;
  json body;
  std::string environment;
  std::string versionId;
  int statusCode = 0;
  json responseBody;
  json generatorInternals = json::object();
  std::string timestamp;
};

inline void to_json(json& j, const RequestRecord& r) {
  j = json{{"requestId", r.requestId},     {"endpoint", r.endpoint},     {"method", r.method},
           {"authPresent", r.authPresent}, {"user", r.user},             {"body", r.body},
           {"environment", r.environment}, {"versionId", r.versionId},   {"statusCode", r.statusCode},
           {"responseBody", r.responseBody}, {"generatorInternals", r.generatorInternals}};
  if (!r.timestamp.empty()) j["timestamp"] = r.timestamp;
}

inline void from_json(const json& j, RequestRecord& r) {
  r.requestId = j.at("requestId").get<std::string>();
  r.endpoint = j.at("endpoint").get<std::string>();
  r.method = j.value("method", "POST");
  r.authPresent = j.at("authPresent").get<bool>();
  r.user = j.value("user", "");
  r.body = j.at("body");
  r.environment = j.value("environment", "");
  r.versionId = j.value("versionId", "");
  r.statusCode = j.value("statusCode", 0);
  r.responseBody = j.value("responseBody", json());
  r.generatorInternals = j.value("generatorInternals", json::object());
  r.timestamp = j.value("timestamp", "");
}

inline registry::ApiRequest to_api_request(const GeneratedRequest& req, const ExecutionContext& ctx) {
  registry::ApiRequest api;
  api.method = req.method;
  api.path = req.endpoint;
  api.body = req.body.dump();
  api.headers["Content-Type"] = "application/json";
  api.headers["X-Registry-User"] = req.user;
  if (req.authPresent) api.headers["Authorization"] = "Bearer " + ctx.authToken;
  return api;
}

inline std::string request_id(const ExecutionContext& ctx, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return ctx.runId + "-" + buf;
}

// Transport failures propagate as registry::TransportError; they never become a status code.
inline RequestRecord execute_request(const GeneratedRequest& req, registry::Transport& transport,
                                     const ExecutionContext& ctx) {
  const auto response = transport.send(to_api_request(req, ctx));
  RequestRecord r;
  r.requestId = request_id(ctx, req.index);
  r.endpoint = req.endpoint;
  r.method = req.method;
  r.authPresent = req.authPresent;
  r.user = req.user;
  r.body = req.body;
  r.environment = ctx.environment;
  r.versionId = ctx.versionId;
  r.statusCode = response.statusCode;
  r.responseBody = response.body;
  r.generatorInternals = req.generatorInternals;
  return r;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct CollectionSummary {
  std::size_t records = 0;
  std::map<int, std::size_t> statusCounts;
};

inline CollectionSummary run_collection(const RequestGenerator& generator, registry::Transport& transport,
                                        const std::filesystem::path& logPath, const ExecutionContext& ctx) {
  if (logPath.has_parent_path()) std::filesystem::create_directories(logPath.parent_path());
  std::ofstream out(logPath, std::ios::app);
  if (!out) throw std::runtime_error("cannot open log " + logPath.string());
  CollectionSummary summary;
  for (std::size_t i = 0; i < generator.config().budget; ++i) {
    auto record = execute_request(generator.generate(i), transport, ctx);
    record.timestamp = utc_timestamp();
    out << json(record).dump() << '\n';
    if (!out) {
      out.flush();
      throw std::runtime_error("write to " + logPath.string() + " failed after " + std::to_string(summary.records) +
                               " records");
    }
    ++summary.records;
    ++summary.statusCounts[record.statusCode];
  }
  out.flush();
  return summary;
}

inline std::vector<RequestRecord> read_log(const std::filesystem::path& logPath) {
  std::ifstream in(logPath);
  if (!in) throw std::runtime_error("cannot read log " + logPath.string());
  std::vector<RequestRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line).get<RequestRecord>());
  }
  return out;
}

}  // namespace evoclass::generator
