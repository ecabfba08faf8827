// Operator command line: serve the API, ingest forecasts, schedule offline,
// verify the ledger and print scenario comparisons.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "gls/http_api.hpp"
#include "gls/service.hpp"

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kIntegrity = 2, kValidation = 3 };

int exit_code_for(gls::ErrorKind kind) {
  switch (kind) {
    case gls::ErrorKind::Configuration:
    case gls::ErrorKind::Io: return kUsage;
    case gls::ErrorKind::Integrity: return kIntegrity;
    default: return kValidation;
  }
}

std::string percent(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::string s = fmt::format("{:.4f}%", *v * 100.0);
  if (s == "-0.0000%") s.erase(0, 1);
  return s;
}
std::string share(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : "n/a"; }

void print_json(const gls::Json& j) { std::cout << j.dump() << '\n'; }

gls::ApiServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const gls::ServiceConfig& cfg, bool json) {
  gls::Service service(cfg);
  gls::ApiServer api(service);
  int port = api.bind(cfg.listen_host, cfg.listen_port);
  if (json)
    print_json(gls::Json{{"listening", cfg.listen_host + ":" + std::to_string(port)}});
  else
    fmt::print("listening on http://{}:{}\n", cfg.listen_host, port);
  std::cout.flush();
  g_server = &api;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  api.listen_after_bind();
  g_server = nullptr;
  return kOk;
}

int cmd_ingest(const gls::ServiceConfig& cfg, const std::string& csv_path, bool json) {
  gls::Service service(cfg);
  auto days = service.ingest_forecast(gls::detail::read_file(csv_path));
  if (json) {
    gls::Json out = gls::Json::array();
    for (const auto& d : days) {
      gls::Json flags = gls::Json::array();
      for (const auto& f : d.quality_flags) flags.push_back(gls::Json{{"hour", f.hour}, {"issue", f.issue}});
      out.push_back(gls::Json{{"date", gls::format_date(d.date)}, {"digest", gls::to_hex(d.digest)}, {"quality_flags", flags}});
    }
    print_json(gls::Json{{"days", out}});
  } else {
    for (const auto& d : days) {
      fmt::print("{}  {}\n", gls::format_date(d.date), gls::to_hex(d.digest));
      for (const auto& f : d.quality_flags) fmt::print("  hour {:2}: {}\n", f.hour, f.issue);
    }
  }
  return kOk;
}

int cmd_register(const gls::ServiceConfig& cfg, gls::BuildingAttributes attrs, bool json) {
  gls::Service service(cfg);
  auto p = service.register_building(std::move(attrs));
  if (json)
    print_json(gls::to_json(p));
  else
    fmt::print("{}  blc={:.6f}\n", p.id(), p.blc);
  return kOk;
}

int cmd_schedule(const gls::ServiceConfig& cfg, const gls::ScheduleRequest& req, bool json) {
  gls::Service service(cfg);
  auto r = service.create_schedule(req);
  if (json) {
    print_json(r.to_json());
  } else {
    fmt::print("{}\n", gls::slot_pattern(r.schedule.slots));
    fmt::print("ehp_hours: {}\n", r.schedule.ehp_hours);
    fmt::print("predicted_increase: {}\n", percent(r.predicted_increase));
    fmt::print("ledger: block {} tx {}\n", r.receipt.height, r.receipt.tx_index);
  }
  return kOk;
}

int cmd_verify(const gls::ServiceConfig& cfg, bool json) {
  auto report = gls::Ledger::verify_file(cfg.resolved_ledger_path(), {{cfg.member_id, cfg.member_key}});
  if (json) {
    print_json(report.to_json());
  } else if (report.intact) {
    fmt::print("intact: {} blocks, state root {}\n", report.blocks_checked, gls::to_hex(report.replayed_state_root));
  } else {
    fmt::print("corrupted at height {}: {}\n", report.first_divergence->height, report.first_divergence->reason);
  }
  return report.intact ? kOk : kIntegrity;
}

int cmd_compare(const gls::ServiceConfig& cfg, const std::filesystem::path& dir, std::optional<int> hours,
                std::optional<double> temp, double blc, bool json) {
  if (!std::filesystem::is_directory(dir))
    throw gls::Error(gls::ErrorKind::Configuration, "scenario directory not found: " + dir.string());
  int k = hours.value_or(8);
  if (!hours && temp)
    k = gls::compute_ehp_hours(gls::TemperatureReading::clamped(*temp), blc, cfg.scheduler);

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  gls::Json rows = gls::Json::array();
  if (!json)
    fmt::print("{:<20} {:<10} {:>5} {:>10} {:>10} {:>10}\n", "scenario", "date", "hours", "baseline", "scheduled",
               "increase");
  for (const auto& f : files) {
    for (const auto& day : gls::parse_forecast_csv(gls::detail::read_file(f))) {
      auto c = gls::compare_scenario(day, k);
      if (json) {
        auto row = c.to_json();
        row["scenario"] = f.filename().string();
        rows.push_back(row);
      } else {
        fmt::print("{:<20} {:<10} {:>5} {:>10} {:>10} {:>10}\n", f.filename().string(), gls::format_date(c.date),
                   c.ehp_hours, share(c.baseline_share), share(c.scheduled_share), percent(c.increase));
      }
    }
  }
  if (json) print_json(gls::Json{{"scenarios", rows}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Renewable-share heat pump scheduler with a permissioned audit ledger"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  bool json = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_flag("--json", json, "JSON output");
  };

  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  add_common(serve);

  std::string csv_path;
  auto* ingest = app.add_subcommand("ingest", "parse and store a forecast CSV");
  ingest->add_option("csv", csv_path, "forecast CSV file")->required()->check(CLI::ExistingFile);
  add_common(ingest);

  gls::BuildingAttributes attrs;
  bool desired_set = false;
  auto* reg = app.add_subcommand("register-building", "store a building profile and derive its load coefficient");
  reg->add_option("--id", attrs.id, "building id (generated when omitted)");
  reg->add_option("--year", attrs.construction_year, "construction year")->required();
  reg->add_option("--area", attrs.living_space_m2, "living space in square meters")->required();
  reg->add_flag("--basement", attrs.has_basement, "building has a basement");
  reg->add_flag("--roof-insulated", attrs.roof_insulated, "roof is insulated");
  reg->add_option("--desired-temp", attrs.desired_temp_c, "desired indoor temperature in C")
      ->each([&](const std::string&) { desired_set = true; });
  add_common(reg);

  std::string building, date;
  double current_temp = 0;
  std::optional<std::int64_t> client_ts;
  auto* sched = app.add_subcommand("schedule", "compute and record a daily schedule");
  sched->add_option("--building", building, "building id")->required();
  sched->add_option("--date", date, "YYYY-MM-DD")->required();
  sched->add_option("--temp", current_temp, "current outdoor temperature in C")->required();
  sched->add_option("--client-ts", client_ts, "client timestamp in ms (defaults to now)");
  add_common(sched);

  auto* verify = app.add_subcommand("verify-ledger", "replay and verify the ledger file");
  add_common(verify);

  std::string scenarios;
  std::optional<int> hours;
  std::optional<double> cmp_temp;
  double cmp_blc = 0.5;
  auto* compare = app.add_subcommand("compare", "baseline vs. scheduled renewable share per forecast fixture");
  compare->add_option("--scenarios", scenarios, "directory of forecast CSV files")->required();
  compare->add_option("--hours", hours, "operating hours per day (default 8)")->check(CLI::Range(0, 24));
  compare->add_option("--temp", cmp_temp, "derive hours from this temperature instead of --hours");
  compare->add_option("--blc", cmp_blc, "load coefficient used with --temp")->check(CLI::Range(0.0, 1.0));
  add_common(compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    gls::ServiceConfig cfg = gls::load_config(config_path ? std::optional<std::filesystem::path>(*config_path)
                                                          : std::nullopt);
    if (*serve) return cmd_serve(cfg, json);
    if (*ingest) return cmd_ingest(cfg, csv_path, json);
    if (*reg) {
      if (!desired_set) attrs.desired_temp_c = cfg.scheduler.target_temp_c;
      return cmd_register(cfg, attrs, json);
    }
    if (*sched) {
      gls::ScheduleRequest req{building, gls::parse_date(date), current_temp, client_ts, false, std::nullopt};
      return cmd_schedule(cfg, req, json);
    }
    if (*verify) return cmd_verify(cfg, json);
    if (*compare) return cmd_compare(cfg, scenarios, hours, cmp_temp, cmp_blc, json);
  } catch (const gls::Error& e) {
    if (json)
      print_json(gls::error_body(e));
    else
      std::cerr << "error (" << gls::to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
