#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "gls/canonical_json.hpp"
#include "gls/date.hpp"
#include "gls/schedule.hpp"

namespace gls {

/// A webhook-controlled heat pump. The trigger URL follows the IFTTT
/// applet shape: {base_url}/trigger/{event}/with/key/{key}.
struct DeviceEndpoint {
  std::string device_id;
  std::string building_id;
  std::string base_url;
  std::string event_on;
  std::string event_off;
  std::string key;

  std::string trigger_url(std::string_view event) const {
    std::string base = base_url;
    while (!base.empty() && base.back() == '/') base.pop_back();
    return base + "/trigger/" + std::string(event) + "/with/key/" + key;
  }

  friend bool operator==(const DeviceEndpoint&, const DeviceEndpoint&) = default;
};

namespace detail {

inline bool is_url_safe_token(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
              c == '.' || c == '~';
    if (!ok) return false;
  }
  return true;
}

}  // namespace detail

inline void validate(const DeviceEndpoint& d) {
  if (d.device_id.empty()) throw Error(ErrorKind::Validation, "device_id is required");
  if (d.building_id.empty()) throw Error(ErrorKind::Validation, "building_id is required");
  if (d.base_url.rfind("http://", 0) != 0 && d.base_url.rfind("https://", 0) != 0)
    throw Error(ErrorKind::Validation, "base_url must be an http(s) URL");
  if (!detail::is_url_safe_token(d.event_on) || !detail::is_url_safe_token(d.event_off))
    throw Error(ErrorKind::Validation, "event names must be non-empty URL-safe tokens");
  if (!detail::is_url_safe_token(d.key)) throw Error(ErrorKind::Validation, "webhook key must be a URL-safe token");
}

inline Json to_json(const DeviceEndpoint& d) {
  return Json{{"device_id", d.device_id}, {"building_id", d.building_id}, {"base_url", d.base_url},
              {"event_on", d.event_on},   {"event_off", d.event_off},     {"key", d.key}};
}

inline DeviceEndpoint device_from_json(const Json& j) {
  DeviceEndpoint d{detail::require_string(j, "device_id"), detail::require_string(j, "building_id"),
                   detail::require_string(j, "base_url"),  detail::require_string(j, "event_on"),
                   detail::require_string(j, "event_off"), detail::require_string(j, "key")};
  validate(d);
  return d;
}

enum class SwitchAction { On, Off };
enum class DispatchOutcome { Acked, Failed };

constexpr std::string_view to_string(SwitchAction a) noexcept { return a == SwitchAction::On ? "ON" : "OFF"; }
constexpr std::string_view to_string(DispatchOutcome o) noexcept {
  return o == DispatchOutcome::Acked ? "Acked" : "Failed";
}

/// One webhook transition as executed. `hour` is 0..24; 24 is the
/// end-of-day OFF after a run reaching 23:00.
struct DispatchRecord {
  std::string building_id;
  std::string device_id;
  Date date;
  int hour = 0;
  SwitchAction action = SwitchAction::On;
  int attempt_count = 1;
  DispatchOutcome outcome = DispatchOutcome::Acked;
  std::int64_t latency_ms = 0;

  friend bool operator==(const DispatchRecord&, const DispatchRecord&) = default;
};

inline Json to_json(const DispatchRecord& r) {
  return Json{{"building_id", r.building_id},
              {"device_id", r.device_id},
              {"date", format_date(r.date)},
              {"hour", r.hour},
              {"action", std::string(to_string(r.action))},
              {"attempt_count", r.attempt_count},
              {"outcome", std::string(to_string(r.outcome))},
              {"latency_ms", r.latency_ms}};
}

inline DispatchRecord dispatch_record_from_json(const Json& j) {
  DispatchRecord r;
  r.building_id = detail::require_string(j, "building_id");
  r.device_id = detail::require_string(j, "device_id");
  r.date = parse_date(detail::require_string(j, "date"));
  r.hour = detail::require_int(j, "hour");
  if (r.hour < 0 || r.hour > kHoursPerDay) throw Error(ErrorKind::Validation, "usage hour must lie in 0..24");
  const auto action = detail::require_string(j, "action");
  if (action == "ON") r.action = SwitchAction::On;
  else if (action == "OFF") r.action = SwitchAction::Off;
  else throw Error(ErrorKind::Validation, "action must be ON or OFF");
  r.attempt_count = detail::require_int(j, "attempt_count");
  if (r.attempt_count < 1) throw Error(ErrorKind::Validation, "attempt_count must be at least 1");
  const auto outcome = detail::require_string(j, "outcome");
  if (outcome == "Acked") r.outcome = DispatchOutcome::Acked;
  else if (outcome == "Failed") r.outcome = DispatchOutcome::Failed;
  else throw Error(ErrorKind::Validation, "outcome must be Acked or Failed");
  const Json& latency = detail::require(j, "latency_ms");
  if (!latency.is_number_integer() || latency.get<std::int64_t>() < 0)
    throw Error(ErrorKind::Validation, "latency_ms must be a non-negative integer");
  r.latency_ms = latency.get<std::int64_t>();
  return r;
}

}  // namespace gls
