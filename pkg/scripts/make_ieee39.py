"""Generate the bundled case files in src/sccprice/data/.

The 39-bus network uses the standard New England line data; generator
economics, reactances, IBR placement, profiles and SCC limits are
illustrative values chosen so the SCC constraint binds in windy hours.

    python scripts/make_ieee39.py
"""

from __future__ import annotations

import json
import math
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "sccprice" / "data"

# (from, to, r, x) with 1-based bus numbers
LINES = [
    (1, 2, .0035, .0411), (1, 39, .001, .025), (2, 3, .0013, .0151), (2, 25, .007, .0086),
    (2, 30, 0, .0181), (3, 4, .0013, .0213), (3, 18, .0011, .0133), (4, 5, .0008, .0128),
    (4, 14, .0008, .0129), (5, 6, .0002, .0026), (5, 8, .0008, .0112), (6, 7, .0006, .0092),
    (6, 11, .0007, .0082), (6, 31, 0, .025), (7, 8, .0004, .0046), (8, 9, .0023, .0363),
    (9, 39, .001, .025), (10, 11, .0004, .0043), (10, 13, .0004, .0043), (10, 32, 0, .02),
    (12, 11, .0016, .0435), (12, 13, .0016, .0435), (13, 14, .0009, .0101), (14, 15, .0018, .0217),
    (15, 16, .0009, .0094), (16, 17, .0007, .0089), (16, 19, .0016, .0195), (16, 21, .0008, .0135),
    (16, 24, .0003, .0059), (17, 18, .0007, .0082), (17, 27, .0013, .0173), (19, 20, .0007, .0138),
    (19, 33, .0007, .0142), (20, 34, .0009, .018), (21, 22, .0008, .014), (22, 23, .0006, .0096),
    (22, 35, 0, .0143), (23, 24, .0022, .035), (23, 36, .0005, .0272), (25, 26, .0032, .0323),
    (25, 37, .0006, .0232), (26, 27, .0014, .0147), (26, 28, .0043, .0474), (26, 29, .0057, .0625),
    (28, 29, .0014, .0151), (29, 38, .0008, .0156),
]

# bus, p_max, p_min, marginal, no-load, startup, x_d2 (system base)
GENS = [
    (30, 1100, 350, 12, 1500, 20000, 0.015),
    (31, 1000, 300, 13, 1400, 18000, 0.016),
    (32, 1000, 300, 14, 1400, 18000, 0.016),
    (33, 650, 200, 30, 900, 8000, 0.04),
    (34, 500, 150, 34, 800, 7000, 0.045),
    (35, 650, 200, 32, 900, 8500, 0.04),
    (36, 560, 170, 36, 850, 7500, 0.045),
    (37, 540, 160, 38, 800, 7000, 0.045),
    (38, 830, 250, 28, 1000, 9000, 0.035),
    (39, 900, 270, 26, 1100, 10000, 0.033),
]

LOADS = {3: 322, 4: 500, 7: 233.8, 8: 522, 12: 7.5, 15: 320, 16: 329, 18: 158, 20: 628,
         21: 274, 23: 247.5, 24: 308.6, 25: 224, 26: 139, 27: 281, 28: 206, 29: 283.5,
         31: 9.2, 39: 1104}

IBR_BUSES = [3, 4, 14, 16]
IBR_CAPACITY = 800.0
IBR_CURRENT = 1.2 * IBR_CAPACITY / 100.0  # p.u. at full output
# bus (1-based) -> p.u.; each limit sits where the constraint binds in a
# subset of hours while the other hours stay clear of the fitting band
SCC_LIMITS = {3: 68.0, 4: 70.0, 14: 67.1, 16: 54.6}

HOURS = 24
D_MIN, D_MAX = 5160.0, 6240.0


def demand_profile() -> list[float]:
    """Daily system demand in MW: night trough, morning ramp, evening peak."""
    shape = []
    for h in range(HOURS):
        v = 0.55 - 0.45 * math.cos(2 * math.pi * (h - 4) / 24) + 0.12 * math.exp(-((h - 18.5) ** 2) / 4)
        shape.append(v)
    lo, hi = min(shape), max(shape)
    return [D_MIN + (D_MAX - D_MIN) * (v - lo) / (hi - lo) for v in shape]


def wind_profile() -> list[float]:
    """Availability fraction shared by all IBRs: high at night, lowest after noon."""
    out = []
    for h in range(HOURS):
        v = 0.55 + 0.45 * math.cos(2 * math.pi * (h - 1) / 24)
        out.append(round(min(0.9, max(0.05, v)), 4))
    return out


def ieee39(limits: dict[int, float]) -> dict:
    total = sum(LOADS.values())
    profile = demand_profile()
    demand = {str(b - 1): [round(p * mw / total, 4) for mw in profile] for b, p in LOADS.items()}
    return {
        "name": "ieee39-scc",
        "base_mva": 100.0,
        "shed_cost": 10000.0,
        "horizon": HOURS,
        "buses": [{"id": i, "name": f"bus{i + 1}"} for i in range(39)],
        "lines": [{"from_bus": f - 1, "to_bus": t - 1, "r": r, "x": x} for f, t, r, x in LINES],
        "gens": [
            {"id": i, "name": f"SG{i + 1}", "bus": b - 1, "p_max": pmax, "p_min": pmin,
             "cost_marginal": mc, "cost_noload": nl, "cost_startup": su, "x_d2": xd}
            for i, (b, pmax, pmin, mc, nl, su, xd) in enumerate(GENS)
        ],
        "ibrs": [
            {"id": i, "name": f"IBR{i + 1}", "bus": b - 1, "capacity": IBR_CAPACITY,
             "fault_current": IBR_CURRENT, "availability": wind_profile()}
            for i, b in enumerate(IBR_BUSES)
        ],
        "demand": demand,
        "scc_limits": {str(b - 1): v for b, v in sorted(limits.items())},
    }


def micro3() -> dict:
    """Three buses, two SGs, one IBR, four hours."""
    return {
        "name": "micro3",
        "base_mva": 100.0,
        "shed_cost": 10000.0,
        "horizon": 4,
        "buses": [{"id": i, "name": f"bus{i + 1}"} for i in range(3)],
        "lines": [
            {"from_bus": 0, "to_bus": 1, "r": 0.01, "x": 0.1},
            {"from_bus": 1, "to_bus": 2, "r": 0.01, "x": 0.08},
            {"from_bus": 0, "to_bus": 2, "r": 0.02, "x": 0.12},
        ],
        "gens": [
            {"id": 0, "name": "SG1", "bus": 0, "p_max": 100, "p_min": 20, "cost_marginal": 10,
             "cost_noload": 100, "cost_startup": 500, "x_d2": 0.2},
            {"id": 1, "name": "SG2", "bus": 1, "p_max": 80, "p_min": 10, "cost_marginal": 20,
             "cost_noload": 50, "cost_startup": 200, "x_d2": 0.25},
        ],
        "ibrs": [
            {"id": 0, "name": "IBR1", "bus": 2, "capacity": 80, "fault_current": 0.9,
             "availability": [0.9, 0.6, 0.3, 0.8]},
        ],
        "demand": {"1": [60, 80, 110, 70], "2": [30, 40, 50, 35]},
        "scc_limits": {"2": 4.0},
    }


def main() -> None:
    (DATA / "ieee39.json").write_text(json.dumps(ieee39(SCC_LIMITS), indent=1) + "\n")
    (DATA / "micro3.json").write_text(json.dumps(micro3(), indent=1) + "\n")


if __name__ == "__main__":
    main()
