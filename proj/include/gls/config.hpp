#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "gls/core.hpp"
#include "gls/error.hpp"

namespace gls {

struct ServiceConfig {
  SchedulerConfig scheduler;
  int block_interval_ms = 0;
  std::filesystem::path data_dir = "gls-data";
  std::filesystem::path ledger_path;  // defaults to data_dir/ledger.psb
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  std::string member_id = "public-entity";
  std::string member_key = "change-me";
  std::filesystem::path ui_dir;  // static console files served under /ui when set

  std::filesystem::path resolved_ledger_path() const {
    return ledger_path.empty() ? data_dir / "ledger.psb" : ledger_path;
  }
};

namespace detail {

inline std::string trim_copy(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline double config_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw Error(ErrorKind::Configuration, "config key '" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline int config_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw Error(ErrorKind::Configuration, "config key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

}  // namespace detail

/// Applies one `key = value` setting. Unknown keys are a configuration error.
inline void apply_setting(ServiceConfig& cfg, const std::string& key, const std::string& value,
                          const std::filesystem::path& base_dir = {}) {
  auto path_value = [&](const std::string& v) {
    std::filesystem::path p = v;
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  if (key == "alpha") cfg.scheduler.alpha = detail::config_double(key, value);
  else if (key == "beta") cfg.scheduler.beta = detail::config_double(key, value);
  else if (key == "target_temp_c") cfg.scheduler.target_temp_c = detail::config_double(key, value);
  else if (key == "min_ehp_hours") cfg.scheduler.min_ehp_hours = detail::config_int(key, value);
  else if (key == "max_ehp_hours") cfg.scheduler.max_ehp_hours = detail::config_int(key, value);
  else if (key == "block_interval_ms") cfg.block_interval_ms = detail::config_int(key, value);
  else if (key == "data_dir") cfg.data_dir = path_value(value);
  else if (key == "ledger_path") cfg.ledger_path = path_value(value);
  else if (key == "listen_host") cfg.listen_host = value;
  else if (key == "listen_port") cfg.listen_port = detail::config_int(key, value);
  else if (key == "member_id") cfg.member_id = value;
  else if (key == "member_key") cfg.member_key = value;
  else if (key == "ui_dir") cfg.ui_dir = path_value(value);
  else throw Error(ErrorKind::Configuration, "unknown config key '" + key + "'");
}

inline void validate(const ServiceConfig& cfg) {
  validate(cfg.scheduler);
  if (cfg.block_interval_ms < 0) throw Error(ErrorKind::Configuration, "block_interval_ms must be >= 0");
  if (cfg.listen_port < 0 || cfg.listen_port > 65535) throw Error(ErrorKind::Configuration, "listen_port out of range");
  if (cfg.member_id.empty() || cfg.member_key.empty())
    throw Error(ErrorKind::Configuration, "member_id and member_key must be set");
}

/// `key = value` lines; `#` starts a comment; values may be double-quoted.
inline ServiceConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {}) {
  ServiceConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos && line.find('"') > hash) line.erase(hash);
    line = detail::trim_copy(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Configuration, "config line " + std::to_string(line_no) + ": expected key = value",
                  line_no);
    std::string key = detail::trim_copy(line.substr(0, eq));
    std::string value = detail::trim_copy(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    apply_setting(cfg, key, value, base_dir);
  }
  return cfg;
}

/// `GLS_<KEY>` environment variables override file settings.
inline void apply_env_overrides(ServiceConfig& cfg,
                                const std::function<const char*(const char*)>& getenv_fn = [](const char* n) {
                                  return std::getenv(n);
                                }) {
  static constexpr const char* keys[] = {"alpha",         "beta",          "target_temp_c", "min_ehp_hours",
                                         "max_ehp_hours", "block_interval_ms", "data_dir",  "ledger_path",
                                         "listen_host",   "listen_port",   "member_id",     "member_key",
                                         "ui_dir"};
  for (const char* key : keys) {
    std::string name = "GLS_";
    for (const char* c = key; *c; ++c) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(*c))));
    if (const char* v = getenv_fn(name.c_str())) apply_setting(cfg, key, v);
  }
}

inline ServiceConfig load_config(const std::optional<std::filesystem::path>& path) {
  ServiceConfig cfg;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw Error(ErrorKind::Configuration, "cannot read config file " + path->string());
    std::ostringstream ss;
    ss << in.rdbuf();
    cfg = parse_config(ss.str(), path->parent_path());
  }
  apply_env_overrides(cfg);
  validate(cfg);
  return cfg;
}

}  // namespace gls
