#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "gls/error.hpp"

namespace gls {

using Date = std::chrono::year_month_day;

inline std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

namespace detail {

inline bool parse_fixed_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace detail

/// Strict `YYYY-MM-DD`. Returns false on anything else, including
/// calendar-invalid dates such as 2023-02-29.
inline bool try_parse_date(std::string_view s, Date& out) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  int y = 0, m = 0, d = 0;
  if (!detail::parse_fixed_int(s.substr(0, 4), y) || !detail::parse_fixed_int(s.substr(5, 2), m) ||
      !detail::parse_fixed_int(s.substr(8, 2), d))
    return false;
  Date ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
           std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return false;
  out = ymd;
  return true;
}

inline Date parse_date(std::string_view s) {
  Date d;
  if (!try_parse_date(s, d))
    throw Error(ErrorKind::Validation, "invalid date '" + std::string(s) + "', expected YYYY-MM-DD");
  return d;
}

inline Date previous_day(Date d) {
  return Date{std::chrono::sys_days{d} - std::chrono::days{1}};
}

/// Seconds since the Unix epoch of `hour` o'clock on `d`, UTC. Hour 24 is
/// midnight of the following day.
inline std::int64_t epoch_seconds(Date d, int hour = 0) {
  auto midnight = std::chrono::sys_seconds{std::chrono::sys_days{d}};
  return midnight.time_since_epoch().count() + std::int64_t{hour} * 3600;
}

}  // namespace gls
