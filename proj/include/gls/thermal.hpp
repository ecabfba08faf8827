#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <string>

#include "gls/core.hpp"
#include "gls/date.hpp"
#include "gls/error.hpp"
#include "gls/thermal_tables.hpp"

namespace gls {

inline int current_calendar_year() {
  auto today = std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now());
  return static_cast<int>(std::chrono::year_month_day{today}.year());
}

inline double blc_base_for_year(int year) noexcept {
  if (year < tables::kBandPre1960End) return tables::kBlcBasePre1960;
  if (year < tables::kBand1960End) return tables::kBlcBase1960To1989;
  if (year < tables::kBand1990End) return tables::kBlcBase1990To2009;
  return tables::kBlcBaseFrom2010;
}

inline double derive_blc(const BuildingAttributes& attrs, int current_year) {
  if (attrs.construction_year < tables::kMinConstructionYear || attrs.construction_year > current_year)
    throw Error(ErrorKind::Domain, "construction_year must lie in [" + std::to_string(tables::kMinConstructionYear) +
                                       ", " + std::to_string(current_year) + "]");
  if (!(attrs.living_space_m2 > 0.0) || !std::isfinite(attrs.living_space_m2))
    throw Error(ErrorKind::Domain, "living_space_m2 must be positive");

  double blc = blc_base_for_year(attrs.construction_year);
  if (attrs.roof_insulated) blc += tables::kBlcRoofInsulationBonus;
  if (attrs.has_basement) blc += tables::kBlcBasementBonus;
  if (attrs.living_space_m2 > tables::kLargeBuildingAreaM2) blc -= tables::kBlcLargeBuildingPenalty;
  return std::clamp(blc, 0.0, 1.0);
}

inline double derive_blc(const BuildingAttributes& attrs) { return derive_blc(attrs, current_calendar_year()); }

inline BuildingProfile make_profile(BuildingAttributes attrs, int current_year = current_calendar_year()) {
  double blc = derive_blc(attrs, current_year);
  return BuildingProfile{std::move(attrs), blc};
}

struct DemandTables {
  std::array<double, kHoursPerDay> occupancy = tables::kOccupancyWeight;
  std::array<double, kHoursPerDay> lighting = tables::kLightingCurve;
  std::array<double, kHoursPerDay> appliances = tables::kAppliancesCurve;
};

struct DemandComponents {
  double heating = 0.0;
  double lighting = 0.0;
  double appliances = 0.0;
};

struct DemandProfile {
  std::string building_id;
  Date date;
  std::array<double, kHoursPerDay> values{};
  std::array<DemandComponents, kHoursPerDay> components{};
};

/// Normalized 24-hour consumption forecast. Raw heating is occupancy times
/// relative temperature deviation times (1 - blc); the whole profile is
/// scaled so the daily peak is exactly 1 (or left at 0 for an empty day).
/// The target is the building's desired temperature.
inline DemandProfile predict_demand(const BuildingProfile& profile, const TemperatureReading& temp, Date date,
                                    const DemandTables& tables = {}) {
  const double target = profile.attributes.desired_temp_c;
  if (!(target > 0.0) || !std::isfinite(target)) throw Error(ErrorKind::Domain, "desired_temp_c must be positive");
  if (!(profile.blc >= 0.0 && profile.blc <= 1.0)) throw Error(ErrorKind::Domain, "blc must lie in [0,1]");
  if (!(temp.temp_c >= kMinTemperatureC && temp.temp_c <= kMaxTemperatureC))
    throw Error(ErrorKind::Domain, "temperature must lie in [0,40] degrees C");

  const double heat_factor = std::abs(temp.temp_c - target) / target * (1.0 - profile.blc);

  DemandProfile out{profile.id(), date, {}, {}};
  std::array<DemandComponents, kHoursPerDay> raw{};
  double peak = 0.0;
  for (std::size_t h = 0; h < kHoursPerDay; ++h) {
    raw[h] = {tables.occupancy[h] * heat_factor, tables.lighting[h], tables.appliances[h]};
    if (raw[h].heating < 0 || raw[h].lighting < 0 || raw[h].appliances < 0)
      throw Error(ErrorKind::Domain, "demand tables must be non-negative");
    peak = std::max(peak, raw[h].heating + raw[h].lighting + raw[h].appliances);
  }
  if (peak == 0.0) return out;
  for (std::size_t h = 0; h < kHoursPerDay; ++h) {
    out.components[h] = {raw[h].heating / peak, raw[h].lighting / peak, raw[h].appliances / peak};
    out.values[h] = std::min(1.0, out.components[h].heating + out.components[h].lighting + out.components[h].appliances);
  }
  return out;
}

}  // namespace gls
