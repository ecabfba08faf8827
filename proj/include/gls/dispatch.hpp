#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <stop_token>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>

#include "gls/device.hpp"
#include "gls/ledger.hpp"
#include "gls/schedule.hpp"

namespace gls {

struct Transition {
  int hour = 0;  // 0..24
  SwitchAction action = SwitchAction::On;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// ON at every off->on edge, OFF at every on->off edge. The device is off
/// before hour 0; a run still on at 23:00 is closed by OFF at hour 24.
inline std::vector<Transition> plan_transitions(const HourSlots& slots) {
  std::vector<Transition> out;
  bool state = false;
  for (int h = 0; h < kHoursPerDay; ++h) {
    bool on = slots[static_cast<std::size_t>(h)];
    if (on != state) out.push_back({h, on ? SwitchAction::On : SwitchAction::Off});
    state = on;
  }
  if (state) out.push_back({kHoursPerDay, SwitchAction::Off});
  return out;
}

inline std::vector<Transition> plan_transitions(const DailySchedule& schedule) {
  return plan_transitions(schedule.slots);
}

/// Time source for dispatch. Simulated clocks jump instead of sleeping.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() = 0;
  virtual void sleep_until_ms(std::int64_t deadline_ms) = 0;
  void sleep_for_ms(std::int64_t ms) { sleep_until_ms(now_ms() + ms); }
};

/// Wall clock. Sleeps are cut short with a cancellation error once `stop`
/// is requested, so a pending dispatch day can be abandoned on shutdown.
class SystemClock final : public Clock {
 public:
  explicit SystemClock(std::stop_token stop = {}) : stop_(std::move(stop)) {}

  std::int64_t now_ms() override {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  }
  void sleep_until_ms(std::int64_t deadline_ms) override {
    std::unique_lock lock(mutex_);
    while (now_ms() < deadline_ms) {
      if (stop_.stop_possible()) {
        cv_.wait_for(lock, stop_, std::chrono::milliseconds(deadline_ms - now_ms()), [] { return false; });
        if (stop_.stop_requested()) throw Error(ErrorKind::Io, "dispatch cancelled");
      } else {
        cv_.wait_for(lock, std::chrono::milliseconds(deadline_ms - now_ms()));
      }
    }
  }

 private:
  std::stop_token stop_;
  std::mutex mutex_;
  std::condition_variable_any cv_;
};

class SimulatedClock final : public Clock {
 public:
  explicit SimulatedClock(std::int64_t start_ms = 0) : now_(start_ms) {}
  std::int64_t now_ms() override {
    std::lock_guard lock(mutex_);
    return now_;
  }
  void sleep_until_ms(std::int64_t deadline_ms) override {
    std::lock_guard lock(mutex_);
    if (deadline_ms > now_) {
      slept_ms_ += deadline_ms - now_;
      now_ = deadline_ms;
    }
  }
  std::int64_t total_slept_ms() {
    std::lock_guard lock(mutex_);
    return slept_ms_;
  }

 private:
  std::mutex mutex_;
  std::int64_t now_;
  std::int64_t slept_ms_ = 0;
};

struct WebhookRequest {
  std::string url;
  std::string body;
  std::string idempotency_key;
  std::chrono::milliseconds timeout{5000};
};

struct WebhookResponse {
  std::optional<int> status;  // empty on connection failure or timeout
  std::string error;

  bool ok() const noexcept { return status && *status >= 200 && *status < 300; }
};

class WebhookTransport {
 public:
  virtual ~WebhookTransport() = default;
  virtual WebhookResponse post(const WebhookRequest& request) = 0;
};

inline constexpr const char* kIdempotencyHeader = "X-Idempotency-Key";

class HttpWebhookTransport final : public WebhookTransport {
 public:
  WebhookResponse post(const WebhookRequest& request) override {
    auto scheme_end = request.url.find("://");
    if (scheme_end == std::string::npos) return {std::nullopt, "malformed URL " + request.url};
    auto path_start = request.url.find('/', scheme_end + 3);
    std::string origin = request.url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : request.url.substr(path_start);

    httplib::Client client(origin);
    if (!client.is_valid()) return {std::nullopt, "unsupported URL " + request.url};
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers{{kIdempotencyHeader, request.idempotency_key}};
    auto res = client.Post(path, headers, request.body, "application/json");
    if (!res) return {std::nullopt, httplib::to_string(res.error())};
    return {res->status, {}};
  }
};

struct RetryPolicy {
  int max_retries = 3;
  std::array<std::int64_t, 3> backoff_ms{1000, 2000, 4000};
  std::chrono::milliseconds request_timeout{5000};

  std::int64_t backoff_for(int retry) const noexcept {
    auto i = static_cast<std::size_t>(std::min<int>(retry, static_cast<int>(backoff_ms.size()) - 1));
    return backoff_ms[i];
  }
};

/// Where dispatch outcomes land. The ledger-backed sink is the production one.
class UsageSink {
 public:
  virtual ~UsageSink() = default;
  virtual bool is_registered(const DeviceEndpoint& endpoint) = 0;
  virtual void record(const DispatchRecord& record) = 0;
};

class LedgerUsageSink final : public UsageSink {
 public:
  LedgerUsageSink(Ledger& ledger, std::string member_id) : ledger_(ledger), member_id_(std::move(member_id)) {}

  bool is_registered(const DeviceEndpoint& endpoint) override {
    auto d = ledger_.device(endpoint.device_id);
    return d && *d == endpoint;
  }
  void record(const DispatchRecord& record) override {
    ledger_.submit_as(member_id_, TxKind::RecordUsage, to_json(record));
  }

 private:
  Ledger& ledger_;
  std::string member_id_;
};

inline std::string idempotency_key(const DeviceEndpoint& endpoint, Date date, int hour, SwitchAction action) {
  return endpoint.device_id + ":" + format_date(date) + ":" + std::to_string(hour) + ":" + std::string(to_string(action));
}

inline std::string webhook_body(const DailySchedule& schedule, int hour) {
  return canonical_dump(Json{{"value1", schedule.building_id}, {"value2", format_date(schedule.date)}, {"value3", hour}});
}

/// Fires each transition of the day at its hour boundary (UTC), retrying
/// failed calls with backoff. Every outcome, failures included, is recorded
/// to the sink; exhausted retries do not stop the day.
inline std::vector<DispatchRecord> execute_day(const DailySchedule& schedule, const DeviceEndpoint& endpoint,
                                               Clock& clock, WebhookTransport& transport, UsageSink& sink,
                                               const RetryPolicy& policy = {}) {
  if (endpoint.building_id != schedule.building_id)
    throw Error(ErrorKind::Authorization,
                "device " + endpoint.device_id + " is not registered for building " + schedule.building_id);
  if (!sink.is_registered(endpoint))
    throw Error(ErrorKind::Authorization, "device " + endpoint.device_id + " is not registered in the ledger");

  std::vector<DispatchRecord> records;
  for (const auto& t : plan_transitions(schedule)) {
    clock.sleep_until_ms(epoch_seconds(schedule.date, t.hour) * 1000);

    const auto& event = t.action == SwitchAction::On ? endpoint.event_on : endpoint.event_off;
    WebhookRequest request{endpoint.trigger_url(event), webhook_body(schedule, t.hour),
                           idempotency_key(endpoint, schedule.date, t.hour, t.action), policy.request_timeout};

    DispatchRecord rec{schedule.building_id, endpoint.device_id, schedule.date, t.hour, t.action, 0,
                       DispatchOutcome::Failed, 0};
    for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
      if (attempt > 0) clock.sleep_for_ms(policy.backoff_for(attempt - 1));
      auto started = std::chrono::steady_clock::now();
      WebhookResponse res = transport.post(request);
      rec.latency_ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
      rec.attempt_count = attempt + 1;
      if (res.ok()) {
        rec.outcome = DispatchOutcome::Acked;
        break;
      }
    }
    sink.record(rec);
    records.push_back(rec);
  }
  return records;
}

}  // namespace gls
