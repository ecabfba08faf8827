#pragma once

// Versioned constants behind the building load coefficient and the demand
// profile. tests/golden/gen_demand_golden.py parses this file; keep the
// `name = {...}` array layout when editing and regenerate the golden files.

#include <array>

namespace gls::tables {

inline constexpr int kVersion = 1;

inline constexpr int kMinConstructionYear = 1800;

// Base load coefficient by construction-year band.
inline constexpr int kBandPre1960End = 1960;
inline constexpr int kBand1960End = 1990;
inline constexpr int kBand1990End = 2010;
inline constexpr double kBlcBasePre1960 = 0.30;
inline constexpr double kBlcBase1960To1989 = 0.45;
inline constexpr double kBlcBase1990To2009 = 0.60;
inline constexpr double kBlcBaseFrom2010 = 0.75;

inline constexpr double kBlcRoofInsulationBonus = 0.10;
inline constexpr double kBlcBasementBonus = 0.05;
inline constexpr double kLargeBuildingAreaM2 = 1000.0;
inline constexpr double kBlcLargeBuildingPenalty = 0.05;

// Hourly weights, index = hour of day. Office occupancy peaks 07:00-18:00.
inline constexpr std::array<double, 24> kOccupancyWeight = {
    0.20, 0.20, 0.20, 0.20, 0.20, 0.20, 0.60, 1.00, 1.00, 1.00, 1.00, 1.00,
    1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 0.60, 0.20, 0.20, 0.20, 0.20};

inline constexpr std::array<double, 24> kLightingCurve = {
    0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.10, 0.25, 0.25, 0.25, 0.25, 0.25,
    0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.20, 0.10, 0.02, 0.02, 0.02, 0.02};

inline constexpr std::array<double, 24> kAppliancesCurve = {
    0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.10, 0.30, 0.30, 0.30, 0.30, 0.30,
    0.30, 0.30, 0.30, 0.30, 0.30, 0.30, 0.20, 0.10, 0.05, 0.05, 0.05, 0.05};

}  // namespace gls::tables
