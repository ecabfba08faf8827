#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>

#include "gls/error.hpp"

namespace gls {

inline constexpr int kHoursPerDay = 24;

using HourSlots = std::array<bool, kHoursPerDay>;
using HourShares = std::array<double, kHoursPerDay>;

/// Weights and bounds of the operating-hours heuristic.
struct SchedulerConfig {
  double alpha = 0.5;  // weight of the temperature deviation term
  double beta = 0.5;   // weight of the building retention term
  double target_temp_c = 20.0;
  int min_ehp_hours = 2;
  int max_ehp_hours = 12;

  friend bool operator==(const SchedulerConfig&, const SchedulerConfig&) = default;
};

inline void validate(const SchedulerConfig& cfg) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Configuration, msg); };
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) fail("alpha must lie in [0,1]");
  if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) fail("beta must lie in [0,1]");
  if (!(cfg.alpha + cfg.beta > 0.0)) fail("alpha + beta must be positive");
  if (!(cfg.target_temp_c > 0.0) || !std::isfinite(cfg.target_temp_c))
    fail("target_temp_c must be a positive temperature");
  if (cfg.min_ehp_hours < 0 || cfg.min_ehp_hours > kHoursPerDay || cfg.max_ehp_hours < 0 ||
      cfg.max_ehp_hours > kHoursPerDay)
    fail("min/max operating hours must lie in 0..24");
  if (cfg.min_ehp_hours > cfg.max_ehp_hours) fail("min_ehp_hours exceeds max_ehp_hours");
}

struct BuildingAttributes {
  std::string id;
  double desired_temp_c = 20.0;
  int construction_year = 2000;
  double living_space_m2 = 100.0;
  bool has_basement = false;
  bool roof_insulated = false;

  friend bool operator==(const BuildingAttributes&, const BuildingAttributes&) = default;
};

/// Operator-entered attributes plus the derived load coefficient in [0,1]
/// (higher retains heat better).
struct BuildingProfile {
  BuildingAttributes attributes;
  double blc = 0.0;

  const std::string& id() const noexcept { return attributes.id; }
  friend bool operator==(const BuildingProfile&, const BuildingProfile&) = default;
};

inline constexpr double kMinTemperatureC = 0.0;
inline constexpr double kMaxTemperatureC = 40.0;

struct TemperatureReading {
  double temp_c = 20.0;
  std::int64_t observed_at = 0;  // seconds since epoch

  /// Ingestion-side constructor: out-of-range sensor values are clamped here,
  /// the formulas themselves reject them.
  static TemperatureReading clamped(double temp_c, std::int64_t observed_at = 0) {
    if (!std::isfinite(temp_c)) throw Error(ErrorKind::Validation, "temperature is not a finite number");
    return {std::clamp(temp_c, kMinTemperatureC, kMaxTemperatureC), observed_at};
  }
};

/// Operating hours for one day from temperature deviation and building
/// retention, floored at `min_ehp_hours` and capped at `max_ehp_hours`.
inline int compute_ehp_hours(const TemperatureReading& temp, double blc, const SchedulerConfig& cfg) {
  validate(cfg);
  if (!(blc >= 0.0 && blc <= 1.0)) throw Error(ErrorKind::Domain, "blc must lie in [0,1]");
  if (!(temp.temp_c >= kMinTemperatureC && temp.temp_c <= kMaxTemperatureC))
    throw Error(ErrorKind::Domain, "temperature must lie in [0,40] degrees C");

  const double deviation = std::abs(temp.temp_c - cfg.target_temp_c) / cfg.target_temp_c;
  const double weighted = (cfg.alpha * deviation + cfg.beta * (1.0 - blc)) / (cfg.alpha + cfg.beta);
  const double hours = cfg.max_ehp_hours * weighted;
  // Values within 1e-9 of an integer are that integer; rounding noise must
  // not add a whole hour.
  const double rounded = std::ceil(hours - 1e-9);
  const int capped = static_cast<int>(std::min<double>(rounded, cfg.max_ehp_hours));
  return std::max(cfg.min_ehp_hours, capped);
}

inline double compute_re_share(double re_gen_mwh, double agg_gen_mwh) {
  if (!(agg_gen_mwh > 0.0) || !std::isfinite(agg_gen_mwh))
    throw Error(ErrorKind::Domain, "total generation must be positive");
  if (!(re_gen_mwh >= 0.0)) throw Error(ErrorKind::Domain, "renewable generation must be non-negative");
  if (re_gen_mwh > agg_gen_mwh)
    throw Error(ErrorKind::DataConsistency, "renewable generation exceeds total generation");
  return re_gen_mwh / agg_gen_mwh;
}

/// Marks the `ehp_hours` hours with the highest share. Among equal shares
/// the earlier hour is preferred.
inline HourSlots select_on_hours(std::span<const double> shares, int ehp_hours) {
  if (shares.size() != kHoursPerDay)
    throw Error(ErrorKind::Domain, "share vector must have exactly 24 entries, got " +
                                       std::to_string(shares.size()));
  if (ehp_hours < 0 || ehp_hours > kHoursPerDay)
    throw Error(ErrorKind::Domain, "operating hours must lie in 0..24");
  for (double s : shares)
    if (!std::isfinite(s)) throw Error(ErrorKind::Domain, "share vector contains a non-finite value");

  std::array<int, kHoursPerDay> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return shares[static_cast<std::size_t>(a)] > shares[static_cast<std::size_t>(b)]; });

  HourSlots on{};
  for (int i = 0; i < ehp_hours; ++i) on[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  return on;
}

inline int count_on(const HourSlots& on) noexcept {
  return static_cast<int>(std::count(on.begin(), on.end(), true));
}

/// Mean share over operated hours. Zero operated hours is a domain error.
inline double mean_selected_share(std::span<const double> shares, const HourSlots& on) {
  if (shares.size() != kHoursPerDay) throw Error(ErrorKind::Domain, "share vector must have exactly 24 entries");
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < kHoursPerDay; ++i) {
    if (on[i]) {
      sum += shares[i];
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorKind::Domain, "no operated hours");
  return sum / n;
}

/// Unscheduled baseline: the all-day mean share.
inline double mean_share(std::span<const double> shares) {
  if (shares.size() != kHoursPerDay) throw Error(ErrorKind::Domain, "share vector must have exactly 24 entries");
  return std::accumulate(shares.begin(), shares.end(), 0.0) / kHoursPerDay;
}

/// Relative gain of the operated-hours mean share over the all-day mean.
inline double compute_share_increase(std::span<const double> shares, const HourSlots& on) {
  const double selected = mean_selected_share(shares, on);
  const double baseline = mean_share(shares);
  if (!(baseline > 0.0)) throw Error(ErrorKind::Domain, "no-renewables day: all shares are zero");
  return selected / baseline - 1.0;
}

}  // namespace gls
