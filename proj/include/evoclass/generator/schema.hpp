#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "evoclass/registry/service.hpp"
#include "evoclass/rules/message.hpp"

namespace evoclass::generator {

enum class SemanticType { Enum, DigitString, Date, Identifier };

struct FieldSpec {
  std::string name;
  SemanticType type = SemanticType::Enum;
  std::vector<std::string> values;  // enum members, or example values for digit strings
  int minLength = 1;
  int maxLength = 1;
  double presence = 1.0;  // probability the generator includes the field in a valid payload
};

struct EndpointSpec {
  std::string path;
  bool authRequired = true;
  bool carriesCase = false;  // aggregation: one cancerCase; validation: a list of messages
};

/// What the black-box generator knows about the API: endpoints and body shapes,
/// nothing about the rules behind them.
struct ApiSchema {
  std::vector<EndpointSpec> endpoints;
  std::vector<FieldSpec> messageFields;
  std::vector<FieldSpec> caseFields;
  std::vector<std::string> users;

  const FieldSpec* message_field(std::string_view name) const {
    for (const auto& f : messageFields) {
      if (f.name == name) return &f;
    }
    return nullptr;
  }
};

inline ApiSchema default_schema() {
  namespace f = rules::field;
  ApiSchema s;
  s.endpoints = {{std::string(registry::kValidationPath), true, false},
                 {std::string(registry::kAggregationPath), true, true}};
  s.messageFields = {
      {std::string(f::kMeldingstype), SemanticType::Enum, {"K", "M", "D", "H", "S"}, 1, 1, 1.0},
      {std::string(f::kTopografi), SemanticType::DigitString,
       {"500", "501", "504", "509", "340", "341", "619", "180", "182", "189", "481", "482", "570", "579", "511", "520",
        "540", "559"},
       3, 3, 0.97},
      {std::string(f::kMetastase), SemanticType::Enum, {"0", "1", "5", "6", "7", "8", "9", "A", "B", "C", "D"}, 1, 1,
       1.0},
      {std::string(f::kEkstralokalisasjon), SemanticType::DigitString, {"7777", "0000", "1111", "5555", "9999"}, 4, 4,
       0.85},
      {std::string(f::kCancerType), SemanticType::Enum, {"Breast", "Lung", "Prostate", "Colon"}, 1, 1, 1.0},
      {std::string(f::kDiagnosedato), SemanticType::Date, {}, 10, 10, 0.2},
  };
  s.caseFields = {
      {"caseId", SemanticType::Identifier, {}, 8, 8, 1.0},
      {std::string(f::kDiagnosedato), SemanticType::Date, {}, 10, 10, 1.0},
  };
  s.users = {"registrar", "clinician", "coder"};
  return s;
}

}  // namespace evoclass::generator
