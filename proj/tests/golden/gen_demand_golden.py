#!/usr/bin/env python3
"""Recomputes tests/golden/demand_golden.json from include/gls/thermal_tables.hpp.

Reads the constants straight from the header and evaluates the load
coefficient table and the normalized demand profile without touching the
C++ code. Run after editing the tables:

    python3 tests/golden/gen_demand_golden.py > tests/golden/demand_golden.json
"""

import json
import pathlib
import re
import sys

ROOT = pathlib.Path(__file__).resolve().parents[2]
HEADER = (ROOT / "include" / "gls" / "thermal_tables.hpp").read_text()


def scalar(name):
    m = re.search(rf"\b{name}\s*=\s*([0-9.]+)\s*;", HEADER)
    if not m:
        sys.exit(f"constant {name} not found")
    return float(m.group(1))


def array(name):
    m = re.search(rf"\b{name}\s*=\s*\{{([^}}]*)\}}", HEADER)
    if not m:
        sys.exit(f"array {name} not found")
    values = [float(v) for v in m.group(1).replace("\n", " ").split(",") if v.strip()]
    assert len(values) == 24, name
    return values


def blc(year, area, basement, roof):
    if year < scalar("kBandPre1960End"):
        base = scalar("kBlcBasePre1960")
    elif year < scalar("kBand1960End"):
        base = scalar("kBlcBase1960To1989")
    elif year < scalar("kBand1990End"):
        base = scalar("kBlcBase1990To2009")
    else:
        base = scalar("kBlcBaseFrom2010")
    value = base
    if roof:
        value += scalar("kBlcRoofInsulationBonus")
    if basement:
        value += scalar("kBlcBasementBonus")
    if area > scalar("kLargeBuildingAreaM2"):
        value -= scalar("kBlcLargeBuildingPenalty")
    return min(1.0, max(0.0, value))


def demand(temp, desired, coeff):
    occ = array("kOccupancyWeight")
    light = array("kLightingCurve")
    appl = array("kAppliancesCurve")
    factor = abs(temp - desired) / desired * (1.0 - coeff)
    raw = [(occ[h] * factor, light[h], appl[h]) for h in range(24)]
    peak = max(sum(r) for r in raw)
    if peak == 0:
        return [0.0] * 24, [[0.0, 0.0, 0.0]] * 24
    comps = [[c / peak for c in r] for r in raw]
    return [min(1.0, sum(c)) for c in comps], comps


CASES = [
    {"name": "1975_basement_600m2_T5", "construction_year": 1975, "living_space_m2": 600.0,
     "has_basement": True, "roof_insulated": False, "desired_temp_c": 20.0, "temp_c": 5.0},
    {"name": "2015_roof_1200m2_T12.5", "construction_year": 2015, "living_space_m2": 1200.0,
     "has_basement": False, "roof_insulated": True, "desired_temp_c": 21.0, "temp_c": 12.5},
    {"name": "1930_plain_250m2_T0", "construction_year": 1930, "living_space_m2": 250.0,
     "has_basement": False, "roof_insulated": False, "desired_temp_c": 20.0, "temp_c": 0.0},
]

out = []
for case in CASES:
    coeff = blc(case["construction_year"], case["living_space_m2"], case["has_basement"], case["roof_insulated"])
    values, comps = demand(case["temp_c"], case["desired_temp_c"], coeff)
    out.append(dict(case, blc=coeff, values=values, components=comps))

json.dump({"tables_version": int(scalar("kVersion")), "cases": out}, sys.stdout, indent=1)
sys.stdout.write("\n")
