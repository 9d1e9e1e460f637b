#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evoclass::rules {

namespace detail {
inline bool iequals(std::string_view a, std::string_view b) noexcept {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
    auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; };
    return lower(x) == lower(y);
  });
}
}  // namespace detail

// Canonical payload keys. Rule text refers to them case-insensitively ("Topografi").
namespace field {
inline constexpr std::string_view kMeldingstype = "meldingstype";
inline constexpr std::string_view kTopografi = "topografi";
inline constexpr std::string_view kMetastase = "metastase";
inline constexpr std::string_view kEkstralokalisasjon = "ekstralokalisasjon";
inline constexpr std::string_view kDiagnosedato = "diagnosedato";
inline constexpr std::string_view kCancerType = "cancerType";
}  // namespace field

/// A single cancer message as received from a reporting party. Nothing is
/// validated on construction: any field may be missing or hold garbage.
struct CancerMessage {
  std::map<std::string, std::string> fields;

  std::optional<std::string_view> get(std::string_view name) const {
    for (const auto& [key, value] : fields) {
      if (detail::iequals(key, name)) return std::string_view(value);
    }
    return std::nullopt;
  }

  CancerMessage& set(std::string key, std::string value) {
    fields.insert_or_assign(std::move(key), std::move(value));
    return *this;
  }

  friend bool operator==(const CancerMessage&, const CancerMessage&) = default;
};

struct CancerCase {
  std::string caseId;
  std::optional<std::string> diagnosedato;
  std::vector<CancerMessage> messages;

  friend bool operator==(const CancerCase&, const CancerCase&) = default;
};

}  // namespace evoclass::rules
