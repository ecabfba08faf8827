#pragma once

#include <charconv>
#include <string>

#include <httplib.h>

#include "gls/canonical_json.hpp"
#include "gls/service.hpp"

namespace gls {

inline constexpr const char* kMemberKeyHeader = "X-Member-Key";
inline constexpr const char* kApiVersion = "1";

inline int http_status_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Authorization:
    case ErrorKind::Authentication: return 401;
    case ErrorKind::NotFound: return 404;
    case ErrorKind::Conflict:
    case ErrorKind::Integrity: return 409;
    case ErrorKind::DataConsistency: return 422;
    case ErrorKind::Io: return 500;
    default: return 400;
  }
}

inline Json error_body(const Error& e) {
  Json err{{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
  if (e.line()) err["line"] = *e.line();
  if (e.hour()) err["hour"] = *e.hour();
  return Json{{"error", err}};
}

inline Json openapi_document() {
  auto op = [](const char* summary, const char* ok) {
    return Json{{"summary", summary}, {"responses", Json{{ok, Json{{"description", "success"}}}}}};
  };
  Json paths{
      {"/api/buildings", Json{{"post", op("Register a building and derive its load coefficient", "201")}}},
      {"/api/forecasts", Json{{"post", op("Ingest a forecast CSV (timestamp,wind_mwh,solar_mwh,total_mwh)", "201")}}},
      {"/api/devices", Json{{"post", op("Register a webhook device on the ledger", "201")}}},
      {"/api/schedules", Json{{"post", op("Compute and record a daily schedule; optional config overrides; ?baseline=1 adds the comparison", "201")}}},
      {"/api/schedules/{building}/{date}/execute",
       Json{{"post", op("Dispatch the recorded schedule; ?sim=1 uses a simulated clock", "202")},
            {"get", op("Execution status", "200")}}},
      {"/api/metrics/{building}/{date}", Json{{"get", op("Operational status and renewable-share metrics", "200")}}},
      {"/api/ledger/blocks", Json{{"get", op("Sealed blocks in [from, to]", "200")}}},
      {"/api/ledger/verify", Json{{"get", op("Full replay verification of the ledger", "200")}}},
  };
  return Json{{"openapi", "3.0.3"},
              {"info", Json{{"title", "Green ledger scheduler API"}, {"version", kApiVersion}}},
              {"paths", paths}};
}

/// HTTP/JSON front end over a Service. Doubles are printed round-trip exact.
class ApiServer {
 public:
  explicit ApiServer(Service& service) : service_(service) { routes(); }

  httplib::Server& server() noexcept { return server_; }

  int bind(const std::string& host, int port) {
    int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound <= 0) throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  /// Wraps a handler with error mapping and, for mutations, the member key check.
  Handler guarded(Handler h, bool mutation) {
    return [this, h = std::move(h), mutation](const httplib::Request& req, httplib::Response& res) {
      try {
        if (mutation) {
          const auto& expected = service_.config().member_key;
          Hash given = sha256(req.get_header_value(kMemberKeyHeader));
          if (!req.has_header(kMemberKeyHeader) || !equal_tags(given, sha256(expected)))
            throw Error(ErrorKind::Authorization, "missing or unknown member key");
        }
        h(req, res);
      } catch (const Error& e) {
        reply(res, http_status_for(e.kind()), error_body(e));
      } catch (const Json::exception& e) {
        reply(res, 400, error_body(Error(ErrorKind::Validation, std::string("malformed JSON: ") + e.what())));
      } catch (const std::exception& e) {
        reply(res, 500, error_body(Error(ErrorKind::Io, e.what())));
      }
    };
  }

  static Json body_json(const httplib::Request& req) {
    Json j = Json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorKind::Validation, "request body must be a JSON object");
    return j;
  }

  static bool flag(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return false;
    auto v = req.get_param_value(name);
    return v == "1" || v == "true";
  }

  void routes() {
    server_.Post("/api/buildings", guarded([this](const httplib::Request& req, httplib::Response& res) {
      Json j = body_json(req);
      BuildingAttributes a;
      a.id = j.value("building_id", std::string{});
      a.desired_temp_c = j.contains("desired_temp_c") ? detail::require_number(j, "desired_temp_c")
                                                      : service_.config().scheduler.target_temp_c;
      a.construction_year = detail::require_int(j, "construction_year");
      a.living_space_m2 = detail::require_number(j, "living_space_m2");
      auto boolean = [&](const char* k) {
        if (!j.contains(k)) return false;
        if (!j.at(k).is_boolean()) throw Error(ErrorKind::Validation, std::string("'") + k + "' must be a boolean");
        return j.at(k).get<bool>();
      };
      a.has_basement = boolean("has_basement");
      a.roof_insulated = boolean("roof_insulated");
      auto p = service_.register_building(std::move(a));
      reply(res, 201, to_json(p));
    }, true));

    server_.Get(R"(/api/buildings/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      reply(res, 200, to_json(service_.building(req.matches[1])));
    }, false));

    server_.Post("/api/forecasts", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto days = service_.ingest_forecast(req.body);
      Json dates = Json::array(), digests = Json::array(), flags = Json::array();
      for (const auto& d : days) {
        dates.push_back(format_date(d.date));
        digests.push_back(to_hex(d.digest));
        for (const auto& f : d.quality_flags)
          flags.push_back(Json{{"date", format_date(d.date)}, {"hour", f.hour}, {"issue", f.issue}});
      }
      reply(res, 201, Json{{"dates", dates}, {"digests", digests}, {"quality_flags", flags}});
    }, true));

    server_.Get(R"(/api/forecasts/(\d{4}-\d{2}-\d{2}))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto d = service_.forecast(parse_date(req.matches[1].str()));
      reply(res, 200, Json{{"date", format_date(d.date)}, {"digest", to_hex(d.digest)}, {"shares", Json(d.shares)}});
    }, false));

    server_.Post("/api/devices", guarded([this](const httplib::Request& req, httplib::Response& res) {
      Json j = body_json(req);
      DeviceEndpoint d;
      d.building_id = detail::require_string(j, "building_id");
      d.device_id = j.value("device_id", d.building_id + "-ehp");
      d.base_url = detail::require_string(j, "base_url");
      d.key = detail::require_string(j, "key");
      const Json& events = detail::require(j, "events");
      d.event_on = detail::require_string(events, "on");
      d.event_off = detail::require_string(events, "off");
      auto registered = service_.register_device(d);
      reply(res, 201, to_json(registered));
    }, true));

    server_.Post("/api/schedules", guarded([this](const httplib::Request& req, httplib::Response& res) {
      Json j = body_json(req);
      ScheduleRequest r;
      r.building_id = detail::require_string(j, "building_id");
      r.date = parse_date(detail::require_string(j, "date"));
      r.current_temp_c = detail::require_number(j, "current_temp_c");
      if (j.contains("client_ts")) {
        if (!j.at("client_ts").is_number_integer()) throw Error(ErrorKind::Validation, "client_ts must be an integer");
        r.client_ts = j.at("client_ts").get<std::int64_t>();
      }
      r.baseline = flag(req, "baseline");
      if (j.contains("config")) {
        const Json& o = j.at("config");
        if (!o.is_object()) throw Error(ErrorKind::Validation, "config must be an object");
        SchedulerConfig c = service_.effective_config(service_.building(r.building_id));
        for (const auto& [k, v] : o.items()) {
          if (k == "alpha") c.alpha = detail::require_number(o, "alpha");
          else if (k == "beta") c.beta = detail::require_number(o, "beta");
          else if (k == "target_temp_c") c.target_temp_c = detail::require_number(o, "target_temp_c");
          else if (k == "min_ehp_hours") c.min_ehp_hours = detail::require_int(o, "min_ehp_hours");
          else if (k == "max_ehp_hours") c.max_ehp_hours = detail::require_int(o, "max_ehp_hours");
          else throw Error(ErrorKind::Validation, "unknown config field '" + k + "'");
        }
        r.config = c;
      }
      reply(res, 201, service_.create_schedule(r).to_json());
    }, true));

    server_.Post(R"(/api/schedules/([^/]+)/(\d{4}-\d{2}-\d{2})/execute)",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                   const std::string building = req.matches[1];
                   const Date date = parse_date(req.matches[2].str());
                   const bool sim = flag(req, "sim");
                   service_.start_execution(building, date, sim);
                   reply(res, 202, Json{{"building_id", building}, {"date", format_date(date)}, {"simulated", sim},
                                        {"state", "running"}});
                 }, true));

    server_.Get(R"(/api/schedules/([^/]+)/(\d{4}-\d{2}-\d{2})/execute)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  reply(res, 200, service_.execution_status(req.matches[1], parse_date(req.matches[2].str())).to_json());
                }, false));

    server_.Get(R"(/api/metrics/([^/]+)/(\d{4}-\d{2}-\d{2}))",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  reply(res, 200, service_.compute_metrics(req.matches[1], parse_date(req.matches[2].str())).to_json());
                }, false));

    server_.Get("/api/ledger/blocks", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto param = [&](const char* name, std::uint64_t fallback) -> std::uint64_t {
        if (!req.has_param(name) || req.get_param_value(name).empty()) return fallback;
        const auto v = req.get_param_value(name);
        std::uint64_t out = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || p != v.data() + v.size())
          throw Error(ErrorKind::Validation, std::string("query parameter '") + name + "' must be a non-negative integer");
        return out;
      };
      const auto from = param("from", 0), to = param("to", UINT64_MAX);
      Json blocks = Json::array();
      for (const auto& b : service_.ledger().blocks(from, to)) blocks.push_back(b.to_json());
      reply(res, 200, Json{{"height", service_.ledger().height()}, {"blocks", blocks}});
    }, false));

    server_.Get("/api/ledger/verify", guarded([this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, service_.ledger().verify_chain().to_json());
    }, false));

    server_.Get("/api/openapi", guarded([](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, openapi_document());
    }, false));

    if (!service_.config().ui_dir.empty()) server_.set_mount_point("/ui", service_.config().ui_dir.string());
  }

  Service& service_;
  httplib::Server server_;
};

}  // namespace gls
