#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "modeshift/error.hpp"

namespace modeshift {

// Seconds since midnight of the service day. Values past 86400 are legal
// (GTFS trips running after midnight).
using Seconds = std::int64_t;

inline constexpr Seconds kDay = 86400;
inline constexpr Seconds kBinWidth15Min = 900;

struct TimeWindow {
  Seconds start{};
  Seconds end{};

  // Half-open.
  constexpr bool contains(Seconds t) const { return t >= start && t < end; }
  friend bool operator==(TimeWindow const&, TimeWindow const&) = default;
};

// "H:MM:SS" or "HH:MM:SS"; hours may exceed 23.
inline Seconds parse_clock(std::string_view s) {
  auto const bad = [&] {
    fail(ErrorCode::kFormat, "bad clock time '" + std::string{s} + "'");
  };
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  Seconds parts[3]{};
  int part = 0;
  int digits = 0;
  for (char c : s) {
    if (c >= '0' && c <= '9') {
      parts[part] = parts[part] * 10 + (c - '0');
      ++digits;
    } else if (c == ':' && part < 2 && digits > 0) {
      ++part;
      digits = 0;
    } else {
      bad();
    }
  }
  if (part != 2 || digits != 2 || parts[1] > 59 || parts[2] > 59) {
    bad();
  }
  return parts[0] * 3600 + parts[1] * 60 + parts[2];
}

inline std::string format_clock(Seconds t) {
  char buf[32];
  auto const sign = t < 0 ? "-" : "";
  auto const a = t < 0 ? -t : t;
  std::snprintf(buf, sizeof(buf), "%s%02lld:%02lld:%02lld", sign,
                static_cast<long long>(a / 3600),
                static_cast<long long>((a / 60) % 60),
                static_cast<long long>(a % 60));
  return buf;
}

// Accepts GTFS "YYYYMMDD" and ISO "YYYY-MM-DD".
inline std::chrono::year_month_day parse_date(std::string_view s) {
  std::string digits;
  for (char c : s) {
    if (c >= '0' && c <= '9') {
      digits += c;
    } else if (c != '-') {
      digits.clear();
      break;
    }
  }
  if (digits.size() != 8) {
    fail(ErrorCode::kFormat, "bad date '" + std::string{s} + "'");
  }
  auto const y = std::stoi(digits.substr(0, 4));
  auto const m = static_cast<unsigned>(std::stoi(digits.substr(4, 2)));
  auto const d = static_cast<unsigned>(std::stoi(digits.substr(6, 2)));
  std::chrono::year_month_day const ymd{std::chrono::year{y},
                                        std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) {
    fail(ErrorCode::kFormat, "invalid date '" + std::string{s} + "'");
  }
  return ymd;
}

inline std::string format_date(std::chrono::year_month_day d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

}  // namespace modeshift
