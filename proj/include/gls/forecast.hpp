#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gls/core.hpp"
#include "gls/crypto.hpp"
#include "gls/date.hpp"
#include "gls/error.hpp"

namespace gls {

/// Energy in micro-MWh. Six fractional digits is the canonical precision,
/// so storing fixed point keeps serialization and digests exact.
using MicroMwh = std::int64_t;
inline constexpr MicroMwh kMicroPerMwh = 1'000'000;

inline double to_mwh(MicroMwh v) noexcept { return static_cast<double>(v) / kMicroPerMwh; }

struct ForecastHour {
  int hour = 0;
  MicroMwh wind = 0;
  MicroMwh solar = 0;
  MicroMwh total = 0;

  MicroMwh re_gen() const noexcept { return wind + solar; }
  double re_gen_mwh() const noexcept { return to_mwh(re_gen()); }
  double agg_gen_mwh() const noexcept { return to_mwh(total); }

  friend bool operator==(const ForecastHour&, const ForecastHour&) = default;
};

struct QualityFlag {
  int hour = 0;
  std::string issue;

  friend bool operator==(const QualityFlag&, const QualityFlag&) = default;
};

struct ForecastDay {
  Date date;
  std::string tz = "UTC";
  std::array<ForecastHour, kHoursPerDay> hours{};
  HourShares shares{};
  std::vector<QualityFlag> quality_flags;
  Hash digest{};

  friend bool operator==(const ForecastDay&, const ForecastDay&) = default;
};

inline constexpr std::string_view kForecastHeader = "timestamp,wind_mwh,solar_mwh,total_mwh";

namespace detail {

inline std::string format_micro(MicroMwh v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%lld.%06lld", static_cast<long long>(v / kMicroPerMwh),
                static_cast<long long>(v % kMicroPerMwh));
  return buf;
}

/// Non-negative decimal, no exponent, no sign. Digits beyond the sixth
/// fractional place are rounded half-up.
inline bool parse_micro(std::string_view s, MicroMwh& out) {
  if (s.empty()) return false;
  auto dot = s.find('.');
  std::string_view whole = s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (whole.empty() || (dot != std::string_view::npos && frac.empty())) return false;
  if (whole.size() > 12) return false;
  for (char c : whole)
    if (c < '0' || c > '9') return false;
  for (char c : frac)
    if (c < '0' || c > '9') return false;
  MicroMwh value = 0;
  for (char c : whole) value = value * 10 + (c - '0');
  MicroMwh micro = 0;
  for (std::size_t i = 0; i < 6; ++i) micro = micro * 10 + (i < frac.size() ? frac[i] - '0' : 0);
  value = value * kMicroPerMwh + micro;
  if (frac.size() > 6 && frac[6] >= '5') ++value;
  out = value;
  return true;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// `YYYY-MM-DD[T ]HH:MM[:SS][Z|+HH:MM|-HH:MM]`; only whole hours. The wall
/// clock date and hour are taken as written (file-local zone).
inline bool parse_hourly_timestamp(std::string_view s, Date& date, int& hour, std::string& why) {
  if (s.size() < 16 || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') {
    why = "timestamp is not ISO-8601 'YYYY-MM-DDTHH:MM'";
    return false;
  }
  if (!try_parse_date(s.substr(0, 10), date)) {
    why = "invalid calendar date";
    return false;
  }
  int minute = 0, second = 0;
  if (!parse_fixed_int(s.substr(11, 2), hour) || !parse_fixed_int(s.substr(14, 2), minute) || hour > 23 ||
      minute > 59) {
    why = "invalid time of day";
    return false;
  }
  std::string_view rest = s.substr(16);
  if (!rest.empty() && rest.front() == ':') {
    if (rest.size() < 3 || !parse_fixed_int(rest.substr(1, 2), second) || second > 59) {
      why = "invalid seconds";
      return false;
    }
    rest.remove_prefix(3);
  }
  if (rest == "Z" || rest.empty()) {
  } else if ((rest.front() == '+' || rest.front() == '-') && rest.size() == 6 && rest[3] == ':') {
    int oh = 0, om = 0;
    if (!parse_fixed_int(rest.substr(1, 2), oh) || !parse_fixed_int(rest.substr(4, 2), om) || oh > 23 ||
        om > 59) {
      why = "invalid UTC offset";
      return false;
    }
  } else {
    why = "unexpected trailing characters in timestamp";
    return false;
  }
  if (minute != 0 || second != 0) {
    why = "timestamp is not on an hour boundary";
    return false;
  }
  return true;
}

}  // namespace detail

/// Canonical per-day serialization; the digest input and a valid forecast
/// CSV in its own right.
inline std::string canonical_csv(const ForecastDay& day) {
  std::string out = "# tz=" + day.tz + "\n";
  out += kForecastHeader;
  out += '\n';
  const std::string date = format_date(day.date);
  for (const auto& h : day.hours) {
    char ts[32];
    std::snprintf(ts, sizeof ts, "%sT%02d:00:00", date.c_str(), h.hour);
    out += ts;
    out += ',' + detail::format_micro(h.wind) + ',' + detail::format_micro(h.solar) + ',' +
           detail::format_micro(h.total) + '\n';
  }
  return out;
}

inline Hash forecast_digest(const ForecastDay& day) { return sha256(canonical_csv(day)); }

/// Shares and quality flags from the raw hours. An hour with zero total
/// generation gets share 0 and a flag. Renewables above total is an error.
inline void derive_shares(ForecastDay& day) {
  day.quality_flags.clear();
  for (std::size_t i = 0; i < kHoursPerDay; ++i) {
    const auto& h = day.hours[i];
    if (h.total == 0) {
      day.shares[i] = 0.0;
      day.quality_flags.push_back(
          {h.hour, h.re_gen() > 0 ? "zero total generation with non-zero renewables; share set to 0"
                                  : "zero total generation; share set to 0"});
      continue;
    }
    if (h.re_gen() > h.total)
      throw Error(ErrorKind::DataConsistency,
                  format_date(day.date) + " hour " + std::to_string(h.hour) + ": renewable generation " +
                      detail::format_micro(h.re_gen()) + " exceeds total " + detail::format_micro(h.total),
                  std::nullopt, h.hour);
    // Shares come from exact integers, so scaling both columns leaves them bit-identical.
    day.shares[i] = compute_re_share(static_cast<double>(h.re_gen()), static_cast<double>(h.total));
  }
  day.digest = forecast_digest(day);
}

inline ForecastDay make_forecast_day(Date date, const std::array<ForecastHour, kHoursPerDay>& hours,
                                     std::string tz = "UTC") {
  ForecastDay day;
  day.date = date;
  day.tz = std::move(tz);
  day.hours = hours;
  for (int i = 0; i < kHoursPerDay; ++i)
    if (day.hours[static_cast<std::size_t>(i)].hour != i)
      throw Error(ErrorKind::Validation, "forecast hours must be ordered 0..23");
  derive_shares(day);
  return day;
}

/// Parses `timestamp,wind_mwh,solar_mwh,total_mwh` rows, optionally preceded
/// by a `# tz=<zone>` line, into one ForecastDay per calendar date (sorted).
/// Every day must have each hour 0..23 exactly once.
inline std::vector<ForecastDay> parse_forecast_csv(std::string_view bytes) {
  if (bytes.substr(0, 3) == "\xEF\xBB\xBF") bytes.remove_prefix(3);

  std::string tz = "UTC";
  bool header_seen = false;
  struct Pending {
    std::array<std::optional<ForecastHour>, kHoursPerDay> hours;
    std::array<int, kHoursPerDay> lines{};
  };
  std::map<std::chrono::sys_days, Pending> days;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto eol = bytes.find('\n', pos);
    std::string_view raw = bytes.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? bytes.size() : eol + 1;
    ++line_no;
    std::string_view line = detail::trim(raw);
    if (line.empty()) continue;

    if (line.front() == '#') {
      if (header_seen || line_no != 1)
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": comment allowed only on line 1",
                    line_no);
      std::string_view body = detail::trim(line.substr(1));
      if (body.substr(0, 3) != "tz=" || detail::trim(body.substr(3)).empty())
        throw Error(ErrorKind::Parse, "line 1: expected '# tz=<IANA name>'", line_no);
      tz = std::string(detail::trim(body.substr(3)));
      continue;
    }
    if (!header_seen) {
      if (line != kForecastHeader)
        throw Error(ErrorKind::Parse,
                    "line " + std::to_string(line_no) + ": expected header '" + std::string(kForecastHeader) + "'",
                    line_no);
      header_seen = true;
      continue;
    }

    std::array<std::string_view, 4> fields;
    std::size_t n = 0, start = 0;
    for (;;) {
      auto comma = line.find(',', start);
      if (n == fields.size())
        throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": too many columns", line_no);
      fields[n++] = detail::trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                     : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (n != fields.size())
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected 4 columns", line_no);

    Date date;
    int hour = 0;
    std::string why;
    if (!detail::parse_hourly_timestamp(fields[0], date, hour, why))
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + why, line_no);

    ForecastHour fh{hour, 0, 0, 0};
    static constexpr std::array<const char*, 3> names{"wind_mwh", "solar_mwh", "total_mwh"};
    std::array<MicroMwh*, 3> targets{&fh.wind, &fh.solar, &fh.total};
    for (std::size_t c = 0; c < 3; ++c) {
      if (!detail::parse_micro(fields[c + 1], *targets[c]))
        throw Error(ErrorKind::Parse,
                    "line " + std::to_string(line_no) + ": " + names[c] +
                        " must be a non-negative decimal without exponent, got '" + std::string(fields[c + 1]) + "'",
                    line_no);
    }
    if (fh.total > 0 && fh.re_gen() > fh.total)
      throw Error(ErrorKind::DataConsistency,
                  "line " + std::to_string(line_no) + ": " + format_date(date) + " hour " + std::to_string(hour) +
                      ": renewable generation " + detail::format_micro(fh.re_gen()) + " exceeds total " +
                      detail::format_micro(fh.total),
                  line_no, hour);

    auto& pending = days[std::chrono::sys_days{date}];
    auto slot = static_cast<std::size_t>(hour);
    if (pending.hours[slot])
      throw Error(ErrorKind::Conflict,
                  "line " + std::to_string(line_no) + ": duplicate hour " + std::to_string(hour) + " on " +
                      format_date(date) + " (first seen on line " + std::to_string(pending.lines[slot]) + ")",
                  line_no, hour);
    pending.hours[slot] = fh;
    pending.lines[slot] = line_no;
  }
  if (!header_seen) throw Error(ErrorKind::Parse, "missing header '" + std::string(kForecastHeader) + "'", line_no);

  std::vector<ForecastDay> out;
  for (const auto& [day_key, pending] : days) {
    Date date{day_key};
    std::string missing;
    std::optional<int> first_missing;
    std::array<ForecastHour, kHoursPerDay> hours{};
    for (int h = 0; h < kHoursPerDay; ++h) {
      const auto& slot = pending.hours[static_cast<std::size_t>(h)];
      if (!slot) {
        if (!first_missing) first_missing = h;
        missing += (missing.empty() ? "" : ",") + std::to_string(h);
      } else {
        hours[static_cast<std::size_t>(h)] = *slot;
      }
    }
    if (!missing.empty())
      throw Error(ErrorKind::IncompleteDay, format_date(date) + ": incomplete day, missing hours " + missing,
                  std::nullopt, first_missing);
    out.push_back(make_forecast_day(date, hours, tz));
  }
  return out;
}

}  // namespace gls
