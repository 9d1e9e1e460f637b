#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evoclass/core/date.hpp"
#include "evoclass/core/hash.hpp"
#include "evoclass/core/random.hpp"
#include "evoclass/generator/generator.hpp"

namespace evoclass::features {

using json = nlohmann::json;

/// Flattened view of one request record. Nested keys are joined with '.', array
/// elements are addressed by index. Empty objects and arrays stay as leaves.
using FlatRecord = std::map<std::string, json>;

namespace detail {

inline void flatten_into(const json& j, const std::string& prefix, FlatRecord& out) {
  if (j.is_object() && !j.empty()) {
    for (const auto& [k, v] : j.items()) flatten_into(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_array() && !j.empty()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten_into(j[i], prefix + "." + std::to_string(i), out);
  } else {
    out[prefix] = j;
  }
}

inline bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

inline bool is_post_execution(std::string_view key) {
  return key == "generatorInternals" || starts_with(key, "generatorInternals.") || key == "responseBody" ||
         starts_with(key, "responseBody.") || key == "timestamp";
}

}  // namespace detail

inline FlatRecord flatten(const json& j) {
  FlatRecord out;
  detail::flatten_into(j, "", out);
  return out;
}

// Cleans one record. Works on raw (nested) records and on already flattened ones alike.
inline FlatRecord refine_record(const json& record) {
  FlatRecord out;
  for (auto& [key, value] : flatten(record)) {
    if (detail::is_post_execution(key)) continue;
    if (detail::starts_with(key, "body.")) {
      out[key.substr(5)] = value;
    } else if (key == "endpoint") {
      out["url"] = value;
    } else {
      out[key] = value;
    }
  }
  return out;
}

inline json to_json(const FlatRecord& r) {
  json j = json::object();
  for (const auto& [k, v] : r) j[k] = v;
  return j;
}

struct RefineResult {
  std::vector<FlatRecord> records;
  std::size_t skipped = 0;
};

inline RefineResult refine(std::istream& log) {
  RefineResult result;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(log, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      if (!j.is_object() || !j.contains("statusCode")) throw std::runtime_error("not a request record");
      result.records.push_back(refine_record(j));
    } catch (const std::exception& e) {
      ++result.skipped;
      std::cerr << "warning: skipping log line " << lineNo << ": " << e.what() << '\n';
    }
  }
  return result;
}

inline RefineResult refine_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read log " + path.string());
  return refine(in);
}

// The view the gate sees before a request is sent: no status, no response.
inline FlatRecord pre_execution_record(const generator::GeneratedRequest& req, std::string_view environment,
                                       std::string_view versionId) {
  json j = {{"endpoint", req.endpoint},       {"method", req.method},          {"authPresent", req.authPresent},
            {"user", req.user},               {"body", req.body},              {"environment", environment},
            {"versionId", versionId}};
  return refine_record(j);
}

// ---------------------------------------------------------------------------
// Payload view shared by all feature extractors.

struct PayloadView {
  std::vector<std::map<std::string, const json*>> messages;
  std::optional<const json*> caseDate;
};

inline PayloadView payload_view(const FlatRecord& r) {
  PayloadView v;
  std::map<std::size_t, std::map<std::string, const json*>> byIndex;
  for (const auto& [key, value] : r) {
    std::string_view k = key;
    if (detail::starts_with(k, "cancerCase.")) {
      k.remove_prefix(11);
      if (k == rules::field::kDiagnosedato) {
        v.caseDate = &value;
        continue;
      }
    }
    if (!detail::starts_with(k, "cancerMessages.")) continue;
    k.remove_prefix(15);
    const auto dot = k.find('.');
    if (dot == std::string_view::npos || dot == 0) continue;
    std::size_t idx = 0;
    bool numeric = true;
    for (char c : k.substr(0, dot)) {
      if (c < '0' || c > '9') numeric = false;
      idx = idx * 10 + static_cast<std::size_t>(c - '0');
    }
    if (!numeric) continue;
    auto field = k.substr(dot + 1);
    if (const auto inner = field.find('.'); inner != std::string_view::npos) {
      // A container where a scalar belongs, e.g. cancerMessages.0.topografi.0
      static const json nested = json::array({nullptr});
      byIndex[idx][std::string(field.substr(0, inner))] = &nested;
      continue;
    }
    byIndex[idx][std::string(field)] = &value;
  }
  // Messages that flattened to an empty object still count.
  for (const auto& [key, value] : r) {
    for (std::string_view prefix : {"cancerMessages.", "cancerCase.cancerMessages."}) {
      if (detail::starts_with(key, prefix) && value.is_object() && value.empty()) {
        const auto idx = std::stoul(key.substr(prefix.size()));
        byIndex.try_emplace(idx);
      }
    }
  }
  for (auto& [idx, fields] : byIndex) v.messages.push_back(std::move(fields));
  return v;
}

inline std::string category_of(const json* value) {
  if (value == nullptr) return "<absent>";
  return value->is_string() ? value->get<std::string>() : "<" + std::string(value->type_name()) + ">";
}

inline bool is_digits(const json& v, std::size_t length) {
  if (!v.is_string()) return false;
  const auto& s = v.get_ref<const std::string&>();
  return s.size() == length && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline bool is_date_string(const json& v) { return v.is_string() && is_date_format_valid(v.get<std::string>()); }

// ---------------------------------------------------------------------------
// Feature catalog.

enum class Encoder { Binary, Count, Label };

inline std::string_view to_string(Encoder e) {
  switch (e) {
    case Encoder::Binary: return "binary";
    case Encoder::Count: return "count";
    case Encoder::Label: return "label";
  }
  return "binary";
}

inline Encoder parse_encoder(std::string_view s) {
  if (s == "binary") return Encoder::Binary;
  if (s == "count") return Encoder::Count;
  if (s == "label") return Encoder::Label;
  throw std::invalid_argument("unknown encoder '" + std::string(s) + "'");
}

struct FeatureDef {
  std::string name;
  Encoder encoder = Encoder::Binary;
  std::vector<std::string> categories;  // label encoders only; code = position
};

namespace detail {

struct Extractor {
  std::string_view name;
  Encoder encoder;
  // Binary and count features produce a number; label features produce a category.
  std::function<double(const FlatRecord&, const PayloadView&)> numeric;
  std::function<std::string(const FlatRecord&, const PayloadView&)> category;
};

inline std::string top_level(const FlatRecord& r, const std::string& key) {
  auto it = r.find(key);
  return it == r.end() ? "<absent>" : (it->second.is_string() ? it->second.get<std::string>() : it->second.dump());
}

inline std::string first_message(const PayloadView& v, std::string_view field) {
  if (v.messages.empty()) return "<no message>";
  auto it = v.messages.front().find(std::string(field));
  return category_of(it == v.messages.front().end() ? nullptr : it->second);
}

// 1 iff every present value of `field` across messages passes `ok`; vacuously 1.
inline double all_present(const PayloadView& v, std::string_view field, bool (*ok)(const json&)) {
  for (const auto& m : v.messages) {
    auto it = m.find(std::string(field));
    if (it != m.end() && !ok(*it->second)) return 0.0;
  }
  return 1.0;
}

inline bool is_string_value(const json& v) { return v.is_string(); }
inline bool is_topografi(const json& v) { return is_digits(v, 3); }
inline bool is_ekstralokalisasjon(const json& v) { return is_digits(v, 4); }

inline const std::vector<Extractor>& extractors() {
  namespace f = rules::field;
  static const std::vector<Extractor> all = {
      {"url", Encoder::Label, {}, [](const FlatRecord& r, const PayloadView&) { return top_level(r, "url"); }},
      {"method", Encoder::Label, {}, [](const FlatRecord& r, const PayloadView&) { return top_level(r, "method"); }},
      {"environment", Encoder::Label, {},
       [](const FlatRecord& r, const PayloadView&) { return top_level(r, "environment"); }},
      {"user", Encoder::Label, {}, [](const FlatRecord& r, const PayloadView&) { return top_level(r, "user"); }},
      {"is_no_auth", Encoder::Binary,
       [](const FlatRecord& r, const PayloadView&) {
         auto it = r.find("authPresent");
         return it != r.end() && it->second.is_boolean() && it->second.get<bool>() ? 0.0 : 1.0;
       },
       {}},
      {"cancerMessagesNr", Encoder::Count,
       [](const FlatRecord&, const PayloadView& v) { return static_cast<double>(v.messages.size()); }, {}},
      {"cancerTypesNr", Encoder::Count,
       [](const FlatRecord&, const PayloadView& v) {
         std::set<std::string> types;
         for (const auto& m : v.messages) {
           auto it = m.find(std::string(f::kCancerType));
           if (it != m.end()) types.insert(category_of(it->second));
         }
         return static_cast<double>(types.size());
       },
       {}},
      {"cancerCase.diagnosedato_format_valid", Encoder::Binary,
       [](const FlatRecord&, const PayloadView& v) {
         return !v.caseDate || is_date_string(**v.caseDate) ? 1.0 : 0.0;
       },
       {}},
      {"cancerMessage.diagnosedato_format_valid", Encoder::Binary,
       [](const FlatRecord&, const PayloadView& v) { return all_present(v, f::kDiagnosedato, &is_date_string); }, {}},
      {"cancerMessage.diagnosedatoNr", Encoder::Count,
       [](const FlatRecord&, const PayloadView& v) {
         double n = 0;
         for (const auto& m : v.messages) n += m.count(std::string(f::kDiagnosedato)) ? 1.0 : 0.0;
         return n;
       },
       {}},
      {"topografi_format_valid", Encoder::Binary,
       [](const FlatRecord&, const PayloadView& v) { return all_present(v, f::kTopografi, &is_topografi); }, {}},
      {"ekstralokalisasjon_format_valid", Encoder::Binary,
       [](const FlatRecord&, const PayloadView& v) {
         return all_present(v, f::kEkstralokalisasjon, &is_ekstralokalisasjon);
       },
       {}},
      {"meldingstype_format_valid", Encoder::Binary,
       [](const FlatRecord&, const PayloadView& v) { return all_present(v, f::kMeldingstype, &is_string_value); },
       {}},
      {"metastase_format_valid", Encoder::Binary,
       [](const FlatRecord&, const PayloadView& v) { return all_present(v, f::kMetastase, &is_string_value); }, {}},
      {"cancerType_format_valid", Encoder::Binary,
       [](const FlatRecord&, const PayloadView& v) { return all_present(v, f::kCancerType, &is_string_value); }, {}},
      {"cancerType", Encoder::Label, {},
       [](const FlatRecord&, const PayloadView& v) { return first_message(v, f::kCancerType); }},
      {"meldingstype", Encoder::Label, {},
       [](const FlatRecord&, const PayloadView& v) { return first_message(v, f::kMeldingstype); }},
      {"metastase", Encoder::Label, {},
       [](const FlatRecord&, const PayloadView& v) { return first_message(v, f::kMetastase); }},
  };
  return all;
}

inline const Extractor& extractor(std::string_view name) {
  for (const auto& e : extractors()) {
    if (e.name == name) return e;
  }
  throw std::invalid_argument("unknown feature '" + std::string(name) + "'");
}

}  // namespace detail

inline std::vector<std::string> default_feature_names() {
  std::vector<std::string> out;
  for (const auto& e : detail::extractors()) out.emplace_back(e.name);
  return out;
}

struct FeatureSchema {
  std::vector<FeatureDef> features;
  std::string target = "statusCode == 200";

  std::size_t size() const noexcept { return features.size(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& f : features) out.push_back(f.name);
    return out;
  }

  json to_json() const {
    json fs = json::array();
    for (const auto& f : features) {
      json e = {{"name", f.name}, {"encoder", to_string(f.encoder)}};
      if (f.encoder == Encoder::Label) e["categories"] = f.categories;
      fs.push_back(std::move(e));
    }
    return json{{"features", std::move(fs)}, {"target", target}};
  }

  static FeatureSchema from_json(const json& j) {
    FeatureSchema s;
    for (const auto& e : j.at("features")) {
      FeatureDef f{e.at("name").get<std::string>(), parse_encoder(e.at("encoder").get<std::string>()), {}};
      detail::extractor(f.name);  // reject names this build cannot compute
      if (f.encoder == Encoder::Label) f.categories = e.at("categories").get<std::vector<std::string>>();
      s.features.push_back(std::move(f));
    }
    s.target = j.value("target", s.target);
    return s;
  }

  std::string fingerprint() const { return to_hex(fnv1a(to_json().dump())); }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    out << to_json().dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write feature schema " + path.string());
  }

  static FeatureSchema load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read feature schema " + path.string());
    return from_json(json::parse(in));
  }
};

/// Row-major numeric matrix with its target and the request each row came from.
struct FeatureMatrix {
  std::size_t cols = 0;
  std::vector<double> data;
  std::vector<int> y;
  std::vector<std::string> requestIds;

  std::size_t rows() const noexcept { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  void push_row(std::span<const double> values, int target, std::string id = {}) {
    if (values.size() != cols) throw std::invalid_argument("FeatureMatrix: row width mismatch");
    data.insert(data.end(), values.begin(), values.end());
    y.push_back(target);
    requestIds.push_back(std::move(id));
  }

  FeatureMatrix subset(std::span<const std::size_t> rowsIdx) const {
    FeatureMatrix m;
    m.cols = cols;
    m.data.reserve(rowsIdx.size() * cols);
    for (auto i : rowsIdx) m.push_row(row(i), y[i], requestIds[i]);
    return m;
  }

  FeatureMatrix select_columns(std::span<const std::size_t> keep) const {
    FeatureMatrix m;
    m.cols = keep.size();
    m.y = y;
    m.requestIds = requestIds;
    m.data.reserve(rows() * keep.size());
    for (std::size_t i = 0; i < rows(); ++i) {
      for (auto j : keep) m.data.push_back(at(i, j));
    }
    return m;
  }
};

inline int target_of(const FlatRecord& r) {
  auto it = r.find("statusCode");
  return it != r.end() && it->second.is_number_integer() && it->second.get<int>() == 200 ? 1 : 0;
}

inline std::string request_id_of(const FlatRecord& r) {
  auto it = r.find("requestId");
  return it != r.end() && it->second.is_string() ? it->second.get<std::string>() : std::string();
}

// Encodes one record with a fixed schema. Unseen categories get code |categories|.
inline std::vector<double> featurize(const FlatRecord& r, const FeatureSchema& schema) {
  const auto view = payload_view(r);
  std::vector<double> row;
  row.reserve(schema.size());
  for (const auto& f : schema.features) {
    const auto& ex = detail::extractor(f.name);
    if (f.encoder == Encoder::Label) {
      const auto cat = ex.category(r, view);
      const auto it = std::find(f.categories.begin(), f.categories.end(), cat);
      row.push_back(static_cast<double>(it - f.categories.begin()));
    } else {
      row.push_back(ex.numeric(r, view));
    }
  }
  return row;
}

// Training path (no schema): label tables are built in first-occurrence order.
// Inference path: the supplied schema is used verbatim.
inline std::pair<FeatureMatrix, FeatureSchema> build_features(const std::vector<FlatRecord>& records,
                                                             std::optional<FeatureSchema> schema = std::nullopt) {
  if (!schema) {
    FeatureSchema s;
    for (const auto& e : detail::extractors()) s.features.push_back({std::string(e.name), e.encoder, {}});
    for (const auto& r : records) {
      const auto view = payload_view(r);
      for (auto& f : s.features) {
        if (f.encoder != Encoder::Label) continue;
        auto cat = detail::extractor(f.name).category(r, view);
        if (std::find(f.categories.begin(), f.categories.end(), cat) == f.categories.end()) {
          f.categories.push_back(std::move(cat));
        }
      }
    }
    schema = std::move(s);
  }
  FeatureMatrix m;
  m.cols = schema->size();
  m.data.reserve(records.size() * m.cols);
  for (const auto& r : records) m.push_row(featurize(r, *schema), target_of(r), request_id_of(r));
  return {std::move(m), std::move(*schema)};
}

// One selection step: drops every feature whose importance is exactly zero,
// keeping at least one column.
inline std::pair<FeatureMatrix, FeatureSchema> select_features(const FeatureMatrix& m, const FeatureSchema& schema,
                                                              std::span<const double> importances) {
  if (importances.size() != schema.size() || m.cols != schema.size()) {
    throw std::invalid_argument("select_features: importance vector does not match the schema");
  }
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < importances.size(); ++j) {
    if (importances[j] != 0.0) keep.push_back(j);
  }
  if (keep.empty()) {
    if (schema.size() == 0) throw std::invalid_argument("select_features: empty schema");
    keep.push_back(0);
  }
  FeatureSchema reduced;
  reduced.target = schema.target;
  for (auto j : keep) reduced.features.push_back(schema.features[j]);
  return {m.select_columns(keep), std::move(reduced)};
}

// Repeats train -> score -> drop until no zero-importance feature remains.
template <typename ImportanceFn>
std::pair<FeatureMatrix, FeatureSchema> select_features_iteratively(FeatureMatrix m, FeatureSchema schema,
                                                                    ImportanceFn&& importances_of) {
  while (true) {
    const std::vector<double> imp = importances_of(m);
    auto [next, nextSchema] = select_features(m, schema, imp);
    if (nextSchema.size() == schema.size()) return {std::move(next), std::move(nextSchema)};
    m = std::move(next);
    schema = std::move(nextSchema);
  }
}

inline std::pair<FeatureMatrix, FeatureMatrix> split(const FeatureMatrix& m, double ratio, std::uint64_t seed) {
  if (m.rows() < 5) throw std::invalid_argument("split: need at least 5 rows, got " + std::to_string(m.rows()));
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split: ratio must be in (0,1)");
  std::vector<std::size_t> idx(m.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  const auto nTrain = static_cast<std::size_t>(ratio * static_cast<double>(m.rows()));
  return {m.subset(std::span(idx).first(nTrain)), m.subset(std::span(idx).subspan(nTrain))};
}

inline void write_dataset_csv(const FeatureMatrix& m, const FeatureSchema& schema, std::ostream& out) {
  for (const auto& f : schema.features) out << f.name << ',';
  out << "target\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) out << m.at(i, j) << ',';
    out << m.y[i] << '\n';
  }
}

inline FeatureMatrix read_dataset_csv(std::istream& in, const FeatureSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset: missing header");
  std::string expected;
  for (const auto& f : schema.features) expected += f.name + ",";
  expected += "target";
  if (line != expected) throw std::runtime_error("dataset: header does not match the feature schema");
  FeatureMatrix m;
  m.cols = schema.size();
  std::vector<double> row(m.cols);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (!std::getline(cells, cell, ',')) throw std::runtime_error("dataset: short row");
      row[j] = std::stod(cell);
    }
    if (!std::getline(cells, cell, ',')) throw std::runtime_error("dataset: missing target");
    m.push_row(row, std::stoi(cell));
  }
  return m;
}

}  // namespace evoclass::features
