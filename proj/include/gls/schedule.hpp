#pragma once

#include <optional>
#include <string>

#include "gls/canonical_json.hpp"
#include "gls/core.hpp"
#include "gls/crypto.hpp"
#include "gls/date.hpp"
#include "gls/forecast.hpp"

namespace gls {

struct DailySchedule {
  std::string building_id;
  Date date;
  HourSlots slots{};
  int ehp_hours = 0;
  SchedulerConfig config_snapshot;
  Hash forecast_digest{};
  // Digest of the same building's schedule for the previous day, if any.
  std::optional<Hash> previous_schedule_digest;

  friend bool operator==(const DailySchedule&, const DailySchedule&) = default;
};

/// `#` for an operated hour, `.` otherwise.
inline std::string slot_pattern(const HourSlots& slots) {
  std::string s(kHoursPerDay, '.');
  for (std::size_t i = 0; i < kHoursPerDay; ++i)
    if (slots[i]) s[i] = '#';
  return s;
}

inline void validate(const DailySchedule& s) {
  validate(s.config_snapshot);
  if (s.building_id.empty()) throw Error(ErrorKind::Validation, "schedule has no building id");
  if (count_on(s.slots) != s.ehp_hours) throw Error(ErrorKind::Validation, "ehp_hours disagrees with slot count");
  if (s.ehp_hours < s.config_snapshot.min_ehp_hours || s.ehp_hours > s.config_snapshot.max_ehp_hours)
    throw Error(ErrorKind::Validation, "ehp_hours outside configured bounds");
}

inline Json to_json(const SchedulerConfig& c) {
  return Json{{"alpha", c.alpha},
              {"beta", c.beta},
              {"target_temp_c", c.target_temp_c},
              {"min_ehp_hours", c.min_ehp_hours},
              {"max_ehp_hours", c.max_ehp_hours}};
}

inline Json to_json(const DailySchedule& s) {
  Json slots = Json::array();
  for (bool b : s.slots) slots.push_back(b);
  return Json{{"building_id", s.building_id},
              {"date", format_date(s.date)},
              {"slots", slots},
              {"ehp_hours", s.ehp_hours},
              {"config", to_json(s.config_snapshot)},
              {"forecast_digest", to_hex(s.forecast_digest)},
              {"previous_schedule_digest",
               s.previous_schedule_digest ? Json(to_hex(*s.previous_schedule_digest)) : Json(nullptr)}};
}

namespace detail {

inline const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorKind::Validation, std::string("missing field '") + key + "'");
  return j.at(key);
}

inline double require_number(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_number()) throw Error(ErrorKind::Validation, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

inline int require_int(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_number_integer()) throw Error(ErrorKind::Validation, std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

inline std::string require_string(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_string()) throw Error(ErrorKind::Validation, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

inline Hash require_hash(const Json& j, const char* key) {
  Hash h;
  if (!try_from_hex(require_string(j, key), h))
    throw Error(ErrorKind::Validation, std::string("field '") + key + "' must be 64 lowercase hex characters");
  return h;
}

}  // namespace detail

inline SchedulerConfig scheduler_config_from_json(const Json& j) {
  SchedulerConfig c;
  c.alpha = detail::require_number(j, "alpha");
  c.beta = detail::require_number(j, "beta");
  c.target_temp_c = detail::require_number(j, "target_temp_c");
  c.min_ehp_hours = detail::require_int(j, "min_ehp_hours");
  c.max_ehp_hours = detail::require_int(j, "max_ehp_hours");
  return c;
}

inline DailySchedule schedule_from_json(const Json& j) {
  DailySchedule s;
  s.building_id = detail::require_string(j, "building_id");
  s.date = parse_date(detail::require_string(j, "date"));
  const Json& slots = detail::require(j, "slots");
  if (!slots.is_array() || slots.size() != kHoursPerDay)
    throw Error(ErrorKind::Validation, "'slots' must be an array of 24 booleans");
  for (std::size_t i = 0; i < kHoursPerDay; ++i) {
    if (!slots[i].is_boolean()) throw Error(ErrorKind::Validation, "'slots' must be an array of 24 booleans");
    s.slots[i] = slots[i].get<bool>();
  }
  s.ehp_hours = detail::require_int(j, "ehp_hours");
  s.config_snapshot = scheduler_config_from_json(detail::require(j, "config"));
  s.forecast_digest = detail::require_hash(j, "forecast_digest");
  const Json& prev = detail::require(j, "previous_schedule_digest");
  if (!prev.is_null()) s.previous_schedule_digest = detail::require_hash(j, "previous_schedule_digest");
  validate(s);
  return s;
}

inline Hash schedule_digest(const DailySchedule& s) { return sha256(canonical_dump(to_json(s))); }

/// Operating hours from the heuristic, placed on the highest-share hours of
/// the forecast day.
inline DailySchedule build_schedule(const BuildingProfile& profile, const TemperatureReading& temp,
                                    const ForecastDay& forecast, const SchedulerConfig& cfg,
                                    std::optional<Hash> previous_schedule_digest = std::nullopt) {
  if (profile.id().empty()) throw Error(ErrorKind::Validation, "building profile has no id");
  const int hours = compute_ehp_hours(temp, profile.blc, cfg);
  DailySchedule s;
  s.building_id = profile.id();
  s.date = forecast.date;
  s.slots = select_on_hours(forecast.shares, hours);
  s.ehp_hours = hours;
  s.config_snapshot = cfg;
  s.forecast_digest = forecast.digest;
  s.previous_schedule_digest = previous_schedule_digest;
  return s;
}

}  // namespace gls
