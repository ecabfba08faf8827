#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gls/canonical_json.hpp"
#include "gls/config.hpp"
#include "gls/core.hpp"
#include "gls/dispatch.hpp"
#include "gls/forecast.hpp"
#include "gls/ledger.hpp"
#include "gls/schedule.hpp"
#include "gls/thermal.hpp"

namespace gls {

namespace detail {

/// Whole-file replace via a sibling temp file and rename.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::optional<Json> read_json_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::Io, "cannot parse " + path.string() + ": " + e.what());
  }
}

}  // namespace detail

inline Json to_json(const BuildingProfile& p) {
  const auto& a = p.attributes;
  return Json{{"building_id", a.id},
              {"desired_temp_c", a.desired_temp_c},
              {"construction_year", a.construction_year},
              {"living_space_m2", a.living_space_m2},
              {"has_basement", a.has_basement},
              {"roof_insulated", a.roof_insulated},
              {"blc", p.blc}};
}

/// Building profiles: mutable configuration kept outside the ledger.
class ProfileStore {
 public:
  explicit ProfileStore(std::filesystem::path path) : path_(std::move(path)) {
    if (auto doc = detail::read_json_file(path_)) {
      next_id_ = doc->value("next_id", 1);
      for (const auto& [id, j] : doc->at("buildings").items()) {
        BuildingAttributes a;
        a.id = id;
        a.desired_temp_c = j.at("desired_temp_c").get<double>();
        a.construction_year = j.at("construction_year").get<int>();
        a.living_space_m2 = j.at("living_space_m2").get<double>();
        a.has_basement = j.at("has_basement").get<bool>();
        a.roof_insulated = j.at("roof_insulated").get<bool>();
        profiles_[id] = BuildingProfile{a, j.at("blc").get<double>()};
      }
    }
  }

  std::string next_id() {
    std::lock_guard lock(mutex_);
    for (;;) {
      std::string id = "bldg-" + std::to_string(next_id_++);
      if (!profiles_.count(id)) return id;
    }
  }

  void put(const BuildingProfile& p) {
    std::lock_guard lock(mutex_);
    profiles_[p.id()] = p;
    save_locked();
  }

  std::optional<BuildingProfile> get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = profiles_.find(id);
    if (it == profiles_.end()) return std::nullopt;
    return it->second;
  }

 private:
  void save_locked() {
    Json buildings = Json::object();
    for (const auto& [id, p] : profiles_) {
      Json j = to_json(p);
      j.erase("building_id");
      buildings[id] = j;
    }
    detail::atomic_write(path_, canonical_dump(Json{{"next_id", next_id_}, {"buildings", buildings}}) + "\n");
  }

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  int next_id_ = 1;
  std::map<std::string, BuildingProfile> profiles_;
};

/// Ingested forecast days keyed by date, stored as their canonical CSV.
class ForecastStore {
 public:
  explicit ForecastStore(std::filesystem::path path) : path_(std::move(path)) {
    if (auto doc = detail::read_json_file(path_)) {
      for (const auto& [date, csv] : doc->items())
        for (auto& day : parse_forecast_csv(csv.get<std::string>())) days_[date] = std::move(day);
    }
  }

  void put(const std::vector<ForecastDay>& days) {
    std::lock_guard lock(mutex_);
    for (const auto& d : days) days_[format_date(d.date)] = d;
    Json doc = Json::object();
    for (const auto& [date, d] : days_) doc[date] = canonical_csv(d);
    detail::atomic_write(path_, canonical_dump(doc) + "\n");
  }

  std::optional<ForecastDay> get(Date date) const {
    std::lock_guard lock(mutex_);
    auto it = days_.find(format_date(date));
    if (it == days_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, ForecastDay> days_;
};

/// Scheduled versus unscheduled operation for one forecast day.
struct ScenarioComparison {
  Date date;
  int ehp_hours = 0;
  double baseline_share = 0.0;
  std::optional<double> scheduled_share;  // empty when no hours are operated
  std::optional<double> increase;         // empty when undefined (no hours, no renewables)
  HourSlots slots{};

  Json to_json() const {
    return Json{{"date", format_date(date)},
                {"ehp_hours", ehp_hours},
                {"baseline_share", baseline_share},
                {"scheduled_share", scheduled_share ? Json(*scheduled_share) : Json(nullptr)},
                {"increase", increase ? Json(*increase) : Json(nullptr)},
                {"pattern", slot_pattern(slots)}};
  }
};

inline ScenarioComparison compare_scenario(const ForecastDay& day, int ehp_hours) {
  ScenarioComparison c;
  c.date = day.date;
  c.ehp_hours = ehp_hours;
  c.slots = select_on_hours(day.shares, ehp_hours);
  c.baseline_share = mean_share(day.shares);
  if (ehp_hours > 0) {
    c.scheduled_share = mean_selected_share(day.shares, c.slots);
    if (c.baseline_share > 0.0) c.increase = compute_share_increase(day.shares, c.slots);
  }
  return c;
}

struct ScheduleRequest {
  std::string building_id;
  Date date;
  double current_temp_c = 20.0;
  std::optional<std::int64_t> client_ts;
  bool baseline = false;
  std::optional<SchedulerConfig> config;  // replaces the building's effective config
};

struct ScheduleResult {
  DailySchedule schedule;
  Receipt receipt;
  std::int64_t client_ts = 0;
  std::optional<double> predicted_increase;
  std::optional<ScenarioComparison> baseline;
  DemandProfile demand;

  Json to_json() const {
    Json j = gls::to_json(schedule);
    j["pattern"] = slot_pattern(schedule.slots);
    j["client_ts"] = client_ts;
    j["predicted_increase"] = predicted_increase ? Json(*predicted_increase) : Json(nullptr);
    j["receipt"] = Json{{"height", receipt.height}, {"tx_index", receipt.tx_index}, {"tx_id", to_hex(receipt.tx_id)}};
    j["demand"] = Json(demand.values);
    if (baseline) j["baseline"] = baseline->to_json();
    return j;
  }
};

struct MetricsReport {
  std::string building_id;
  Date date;
  HourSlots slots{};
  std::optional<double> prev_day_re_share;
  std::optional<double> re_share_increase;
  std::size_t usage_acknowledgments = 0;
  std::size_t usage_failures = 0;

  Json to_json() const {
    Json s = Json::array();
    for (bool b : slots) s.push_back(b);
    return Json{{"building_id", building_id},
                {"date", format_date(date)},
                {"slots", s},
                {"pattern", slot_pattern(slots)},
                {"prev_day_re_share", prev_day_re_share ? Json(*prev_day_re_share) : Json(nullptr)},
                {"re_share_increase", re_share_increase ? Json(*re_share_increase) : Json(nullptr)},
                {"usage_acknowledgments", usage_acknowledgments},
                {"usage_failures", usage_failures}};
  }
};

struct ExecutionJob {
  enum class State { Running, Done, Failed };
  State state = State::Running;
  std::vector<DispatchRecord> records;
  std::string error;

  Json to_json() const {
    Json recs = Json::array();
    for (const auto& r : records) recs.push_back(gls::to_json(r));
    return Json{{"state", state == State::Running ? "running" : state == State::Done ? "done" : "failed"},
                {"records", recs},
                {"error", error}};
  }
};

/// Orchestrates the stores, the scheduler and the ledger. Both the HTTP API
/// and the CLI go through this class.
class Service {
 public:
  using TransportFactory = std::function<std::unique_ptr<WebhookTransport>()>;

  explicit Service(ServiceConfig cfg, TransportFactory transports = {})
      : cfg_(std::move(cfg)),
        transports_(transports ? std::move(transports)
                               : TransportFactory([] { return std::make_unique<HttpWebhookTransport>(); })),
        profiles_(cfg_.data_dir / "buildings.json"),
        forecasts_(cfg_.data_dir / "forecasts.json") {
    validate(cfg_);
    LedgerOptions opts;
    opts.path = cfg_.resolved_ledger_path();
    opts.block_interval = std::chrono::milliseconds(cfg_.block_interval_ms);
    ledger_ = std::make_unique<Ledger>(std::vector<Member>{{cfg_.member_id, cfg_.member_key}}, std::move(opts));
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ~Service() {
    std::map<std::string, std::jthread> workers;
    {
      std::lock_guard lock(jobs_mutex_);
      workers = std::move(workers_);
    }
    for (auto& [key, t] : workers) t.request_stop();
  }

  const ServiceConfig& config() const noexcept { return cfg_; }
  Ledger& ledger() noexcept { return *ledger_; }
  const Ledger& ledger() const noexcept { return *ledger_; }

  BuildingProfile register_building(BuildingAttributes attrs) {
    if (attrs.id.empty()) attrs.id = profiles_.next_id();
    if (!(attrs.desired_temp_c > 0.0)) throw Error(ErrorKind::Validation, "desired_temp_c must be positive");
    BuildingProfile p = make_profile(std::move(attrs));
    profiles_.put(p);
    return p;
  }

  BuildingProfile building(const std::string& id) const {
    auto p = profiles_.get(id);
    if (!p) throw Error(ErrorKind::NotFound, "unknown building " + id);
    return *p;
  }

  std::vector<ForecastDay> ingest_forecast(std::string_view csv) {
    auto days = parse_forecast_csv(csv);
    forecasts_.put(days);
    return days;
  }

  ForecastDay forecast(Date date) const {
    auto d = forecasts_.get(date);
    if (!d) throw Error(ErrorKind::NotFound, "no forecast ingested for " + format_date(date));
    return *d;
  }

  DeviceEndpoint register_device(const DeviceEndpoint& d) {
    validate(d);
    building(d.building_id);
    ledger_->submit_as(cfg_.member_id, TxKind::RegisterDevice, to_json(d));
    return d;
  }

  /// The deployment config with the building's own desired temperature as
  /// the heuristic's target.
  SchedulerConfig effective_config(const BuildingProfile& p) const {
    SchedulerConfig c = cfg_.scheduler;
    c.target_temp_c = p.attributes.desired_temp_c;
    return c;
  }

  ScheduleResult create_schedule(const ScheduleRequest& req) {
    const BuildingProfile profile = building(req.building_id);
    const ForecastDay day = forecast(req.date);
    const TemperatureReading temp = TemperatureReading::clamped(req.current_temp_c, now_ms() / 1000);

    std::optional<Hash> prev;
    if (auto rec = ledger_->schedule(req.building_id, previous_day(req.date))) prev = schedule_digest(rec->schedule);

    ScheduleResult out;
    out.schedule = build_schedule(profile, temp, day, req.config.value_or(effective_config(profile)), prev);
    out.client_ts = req.client_ts.value_or(now_ms());
    out.receipt = ledger_->submit_as(cfg_.member_id, TxKind::RecordSchedule,
                                     Json{{"client_ts", out.client_ts}, {"schedule", to_json(out.schedule)}});
    if (out.schedule.ehp_hours > 0 && mean_share(day.shares) > 0.0)
      out.predicted_increase = compute_share_increase(day.shares, out.schedule.slots);
    if (req.baseline) out.baseline = compare_scenario(day, out.schedule.ehp_hours);
    out.demand = predict_demand(profile, temp, req.date);
    return out;
  }

  /// Runs the recorded schedule for every device of the building, one
  /// dispatcher per device, and blocks until the day is done.
  std::vector<DispatchRecord> execute(const std::string& building_id, Date date, Clock& clock,
                                      const RetryPolicy& policy = {}) {
    auto rec = ledger_->schedule(building_id, date);
    if (!rec) throw Error(ErrorKind::NotFound, "no schedule recorded for " + building_id + " on " + format_date(date));
    auto devices = ledger_->devices_for_building(building_id);
    if (devices.empty()) throw Error(ErrorKind::NotFound, "no devices registered for " + building_id);

    LedgerUsageSink sink(*ledger_, cfg_.member_id);
    std::vector<DispatchRecord> all;
    for (const auto& d : devices) {
      auto transport = transports_();
      auto recs = execute_day(rec->schedule, d, clock, *transport, sink, policy);
      all.insert(all.end(), recs.begin(), recs.end());
    }
    return all;
  }

  /// Starts execution in the background. `simulated` runs on a clock that
  /// starts at the day's midnight and jumps instead of waiting.
  void start_execution(const std::string& building_id, Date date, bool simulated, const RetryPolicy& policy = {}) {
    if (!ledger_->schedule(building_id, date))
      throw Error(ErrorKind::NotFound, "no schedule recorded for " + building_id + " on " + format_date(date));
    if (ledger_->devices_for_building(building_id).empty())
      throw Error(ErrorKind::NotFound, "no devices registered for " + building_id);

    const std::string key = building_id + "/" + format_date(date);
    std::lock_guard lock(jobs_mutex_);
    if (auto it = jobs_.find(key); it != jobs_.end() && it->second->state == ExecutionJob::State::Running)
      throw Error(ErrorKind::Conflict, "execution already running for " + key);
    auto job = std::make_shared<ExecutionJob>();
    jobs_[key] = job;
    if (auto w = workers_.find(key); w != workers_.end()) {
      w->second.join();
      workers_.erase(w);
    }
    workers_.emplace(key, std::jthread([this, job, building_id, date, simulated, policy](std::stop_token st) {
      std::vector<DispatchRecord> records;
      std::string error;
      bool ok = true;
      try {
        if (simulated) {
          SimulatedClock clock(epoch_seconds(date) * 1000);
          records = execute(building_id, date, clock, policy);
        } else {
          SystemClock clock(st);
          records = execute(building_id, date, clock, policy);
        }
      } catch (const std::exception& e) {
        ok = false;
        error = e.what();
      }
      std::lock_guard guard(jobs_mutex_);
      job->records = std::move(records);
      job->error = std::move(error);
      job->state = ok ? ExecutionJob::State::Done : ExecutionJob::State::Failed;
      jobs_cv_.notify_all();
    }));
  }

  ExecutionJob execution_status(const std::string& building_id, Date date) const {
    std::lock_guard lock(jobs_mutex_);
    auto it = jobs_.find(building_id + "/" + format_date(date));
    if (it == jobs_.end())
      throw Error(ErrorKind::NotFound, "no execution started for " + building_id + " on " + format_date(date));
    return *it->second;
  }

  /// Blocks until the job for the key leaves the running state or the
  /// timeout passes.
  ExecutionJob wait_for_execution(const std::string& building_id, Date date, std::chrono::milliseconds timeout) {
    std::unique_lock lock(jobs_mutex_);
    const std::string key = building_id + "/" + format_date(date);
    jobs_cv_.wait_for(lock, timeout, [&] {
      auto it = jobs_.find(key);
      return it != jobs_.end() && it->second->state != ExecutionJob::State::Running;
    });
    auto it = jobs_.find(key);
    if (it == jobs_.end()) throw Error(ErrorKind::NotFound, "no execution started for " + key);
    return *it->second;
  }

  MetricsReport compute_metrics(const std::string& building_id, Date date) const {
    MetricsInputs in = ledger_->query_metrics(building_id, date);
    const ForecastDay day = forecast(date);
    if (day.digest != in.schedule.schedule.forecast_digest)
      throw Error(ErrorKind::Integrity, "forecast for " + format_date(date) +
                                            " does not match the digest recorded with the schedule");

    MetricsReport r;
    r.building_id = building_id;
    r.date = date;
    r.slots = in.schedule.schedule.slots;
    for (const auto& u : in.usage) (u.outcome == DispatchOutcome::Acked ? r.usage_acknowledgments : r.usage_failures)++;
    if (count_on(r.slots) > 0 && mean_share(day.shares) > 0.0) r.re_share_increase = compute_share_increase(day.shares, r.slots);

    const Date prev_date = previous_day(date);
    if (auto prev = ledger_->schedule(building_id, prev_date); prev && count_on(prev->schedule.slots) > 0) {
      if (auto prev_day = forecasts_.get(prev_date)) {
        if (prev_day->digest != prev->schedule.forecast_digest)
          throw Error(ErrorKind::Integrity, "forecast for " + format_date(prev_date) +
                                                " does not match the digest recorded with the schedule");
        r.prev_day_re_share = mean_selected_share(prev_day->shares, prev->schedule.slots);
      }
    }
    return r;
  }

 private:
  static std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  }

  ServiceConfig cfg_;
  TransportFactory transports_;
  ProfileStore profiles_;
  ForecastStore forecasts_;
  std::unique_ptr<Ledger> ledger_;

  mutable std::mutex jobs_mutex_;
  std::condition_variable jobs_cv_;
  std::map<std::string, std::shared_ptr<ExecutionJob>> jobs_;
  std::map<std::string, std::jthread> workers_;
};

}  // namespace gls
