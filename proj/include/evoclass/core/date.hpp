#pragma once

#include <string_view>

namespace evoclass {

// True iff `text` has the shape YYYY-MM-DD (four digits, dash, two digits, dash, two digits).
// Only the shape is checked; "2017-13-45" passes.
constexpr bool is_date_format_valid(std::string_view text) noexcept {
  if (text.size() != 10) return false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (i == 4 || i == 7) {
      if (c != '-') return false;
    } else if (c < '0' || c > '9') {
      return false;
    }
  }
  return true;
}

constexpr bool is_leap_year(int year) noexcept {
  return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

constexpr int days_in_month(int year, int month) noexcept {
  constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month < 1 || month > 12) return 0;
  return month == 2 && is_leap_year(year) ? 29 : days[month - 1];
}

// Format-valid and names a real Gregorian calendar day.
constexpr bool is_calendar_date(std::string_view text) noexcept {
  if (!is_date_format_valid(text)) return false;
  auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) v = v * 10 + (text[i] - '0');
    return v;
  };
  const int year = num(0, 4);
  const int month = num(5, 2);
  const int day = num(8, 2);
  if (year == 0) return false;
  return day >= 1 && day <= days_in_month(year, month);
}

}  // namespace evoclass
