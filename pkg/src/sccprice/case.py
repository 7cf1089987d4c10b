"""Static network description and its JSON case-file format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

DEFAULT_SHED_COST = 10_000.0  # £/MWh
DEFAULT_BASE_MVA = 100.0


class CaseError(ValueError):
    """Raised for malformed or inconsistent case data."""


@dataclass(frozen=True)
class Bus:
    id: int
    name: str = ""


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    series_impedance: complex

    def __post_init__(self) -> None:
        if self.from_bus == self.to_bus:
            raise CaseError(f"line {self.from_bus}-{self.to_bus} is a self loop")
        if abs(self.series_impedance) == 0:
            raise CaseError(f"line {self.from_bus}-{self.to_bus} has zero impedance")


@dataclass(frozen=True)
class SynchGen:
    """Synchronous generator. ``fault_current`` defaults to 1/x_d2 (1 p.u. behind X''d)."""

    id: int
    bus: int
    x_d2: float
    p_min: float
    p_max: float
    cost_marginal: float = 0.0
    cost_noload: float = 0.0
    cost_startup: float = 0.0
    fault_current: float | None = None
    ramp: float | None = None
    min_up: int = 1
    min_down: int = 1
    name: str = ""

    def __post_init__(self) -> None:
        if not self.x_d2 > 0:
            raise CaseError(f"gen {self.id}: x_d2 must be positive")
        if not 0 <= self.p_min <= self.p_max:
            raise CaseError(f"gen {self.id}: need 0 <= p_min <= p_max")
        if self.fault_current is None:
            object.__setattr__(self, "fault_current", 1.0 / self.x_d2)
        if self.fault_current < 0:
            raise CaseError(f"gen {self.id}: negative fault current")
        if not self.name:
            object.__setattr__(self, "name", f"SG{self.id + 1}")


@dataclass(frozen=True)
class Ibr:
    """Inverter-based resource modeled as a current source.

    ``fault_current`` is the injection (p.u.) when the unit is fully online;
    ``availability`` is the per-hour upper bound on the online fraction.
    """

    id: int
    bus: int
    capacity: float
    fault_current: float
    availability: tuple[float, ...]
    name: str = ""

    def __post_init__(self) -> None:
        if not self.capacity > 0:
            raise CaseError(f"ibr {self.id}: capacity must be positive")
        if self.fault_current < 0:
            raise CaseError(f"ibr {self.id}: negative fault current")
        avail = tuple(float(a) for a in self.availability)
        if any(a < 0 or a > 1 for a in avail):
            raise CaseError(f"ibr {self.id}: availability outside [0, 1]")
        object.__setattr__(self, "availability", avail)
        if not self.name:
            object.__setattr__(self, "name", f"IBR{self.id + 1}")


@dataclass(frozen=True, eq=False)
class NetworkCase:
    """Immutable grid + market description.

    ``demand`` is an (n_bus, horizon) array in MW. Instances hash by identity
    so they can key per-case caches.
    """

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    gens: tuple[SynchGen, ...]
    ibrs: tuple[Ibr, ...]
    demand: np.ndarray
    scc_limits: Mapping[int, float]
    base_mva: float = DEFAULT_BASE_MVA
    shed_cost: float = DEFAULT_SHED_COST
    horizon: int = 24
    name: str = ""
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.buses)
        if [b.id for b in self.buses] != list(range(n)):
            raise CaseError("bus ids must be dense 0..N-1 in order")
        for ln in self.lines:
            if not (0 <= ln.from_bus < n and 0 <= ln.to_bus < n):
                raise CaseError(f"line {ln.from_bus}-{ln.to_bus} references unknown bus")
        for i, g in enumerate(self.gens):
            if g.id != i:
                raise CaseError("gen ids must be dense 0..G-1 in order")
            if not 0 <= g.bus < n:
                raise CaseError(f"gen {g.id} on unknown bus {g.bus}")
        for i, c in enumerate(self.ibrs):
            if c.id != i:
                raise CaseError("ibr ids must be dense 0..C-1 in order")
            if not 0 <= c.bus < n:
                raise CaseError(f"ibr {c.id} on unknown bus {c.bus}")
            if len(c.availability) != self.horizon:
                raise CaseError(f"ibr {c.id}: availability length != horizon")
        demand = np.asarray(self.demand, dtype=float)
        if demand.shape != (n, self.horizon):
            raise CaseError(f"demand must have shape ({n}, {self.horizon}), got {demand.shape}")
        if np.any(demand < 0):
            raise CaseError("negative demand")
        demand.setflags(write=False)
        object.__setattr__(self, "demand", demand)
        limits = {int(k): float(v) for k, v in self.scc_limits.items()}
        for bus in limits:
            if not 0 <= bus < n:
                raise CaseError(f"scc limit for unknown bus {bus}")
        object.__setattr__(self, "scc_limits", limits)
        if self.shed_cost <= 0 or self.base_mva <= 0:
            raise CaseError("shed_cost and base_mva must be positive")
        if n > 1 and not _connected(n, self.lines):
            raise CaseError("line graph is not connected")

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_gen(self) -> int:
        return len(self.gens)

    @property
    def n_ibr(self) -> int:
        return len(self.ibrs)

    @property
    def total_demand(self) -> np.ndarray:
        return self.demand.sum(axis=0)

    @property
    def sinks(self) -> list[int]:
        return sorted(self.scc_limits)

    def source_names(self) -> list[str]:
        return [g.name for g in self.gens] + [c.name for c in self.ibrs]

    def availability(self) -> np.ndarray:
        """(n_ibr, horizon) availability matrix."""
        if not self.ibrs:
            return np.zeros((0, self.horizon))
        return np.array([c.availability for c in self.ibrs], dtype=float)


def _connected(n: int, lines: Sequence[Line]) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for ln in lines:
        adj[ln.from_bus].append(ln.to_bus)
        adj[ln.to_bus].append(ln.from_bus)
    seen = {0}
    stack = [0]
    while stack:
        for j in adj[stack.pop()]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == n


# ---------------------------------------------------------------------------
# JSON I/O
# ---------------------------------------------------------------------------

_SCHEMA_FILE = "case.schema.json"


def case_schema() -> dict:
    return json.loads(resources.files("sccprice.data").joinpath(_SCHEMA_FILE).read_text())


def case_from_dict(doc: Mapping[str, Any]) -> NetworkCase:
    import jsonschema

    try:
        jsonschema.validate(doc, case_schema())
    except jsonschema.ValidationError as exc:
        raise CaseError(f"case file does not match schema: {exc.message}") from exc

    horizon = int(doc["horizon"])
    buses = tuple(Bus(int(b["id"]), b.get("name", "")) for b in doc["buses"])
    lines = tuple(
        Line(int(ln["from_bus"]), int(ln["to_bus"]), complex(ln.get("r", 0.0), ln["x"]))
        for ln in doc["lines"]
    )
    gens = tuple(
        SynchGen(
            id=int(g["id"]),
            bus=int(g["bus"]),
            x_d2=float(g["x_d2"]),
            p_min=float(g["p_min"]),
            p_max=float(g["p_max"]),
            cost_marginal=float(g.get("cost_marginal", 0.0)),
            cost_noload=float(g.get("cost_noload", 0.0)),
            cost_startup=float(g.get("cost_startup", 0.0)),
            fault_current=g.get("fault_current"),
            ramp=g.get("ramp"),
            min_up=int(g.get("min_up", 1)),
            min_down=int(g.get("min_down", 1)),
            name=g.get("name", ""),
        )
        for g in doc["gens"]
    )
    ibrs = tuple(
        Ibr(
            id=int(c["id"]),
            bus=int(c["bus"]),
            capacity=float(c["capacity"]),
            fault_current=float(c["fault_current"]),
            availability=tuple(c["availability"]),
            name=c.get("name", ""),
        )
        for c in doc["ibrs"]
    )
    demand = np.zeros((len(buses), horizon))
    for bus, profile in doc["demand"].items():
        b = int(bus)
        if not 0 <= b < len(buses):
            raise CaseError(f"demand for unknown bus {b}")
        if len(profile) != horizon:
            raise CaseError(f"demand profile of bus {b} has length {len(profile)} != horizon")
        demand[b] = profile
    return NetworkCase(
        buses=buses,
        lines=lines,
        gens=gens,
        ibrs=ibrs,
        demand=demand,
        scc_limits={int(k): float(v) for k, v in doc["scc_limits"].items()},
        base_mva=float(doc.get("base_mva", DEFAULT_BASE_MVA)),
        shed_cost=float(doc.get("shed_cost", DEFAULT_SHED_COST)),
        horizon=horizon,
        name=doc.get("name", ""),
    )


def case_to_dict(case: NetworkCase) -> dict:
    return {
        "name": case.name,
        "base_mva": case.base_mva,
        "shed_cost": case.shed_cost,
        "horizon": case.horizon,
        "buses": [{"id": b.id, "name": b.name} for b in case.buses],
        "lines": [
            {"from_bus": ln.from_bus, "to_bus": ln.to_bus,
             "r": ln.series_impedance.real, "x": ln.series_impedance.imag}
            for ln in case.lines
        ],
        "gens": [
            {
                "id": g.id, "name": g.name, "bus": g.bus, "x_d2": g.x_d2,
                "fault_current": g.fault_current, "p_min": g.p_min, "p_max": g.p_max,
                "cost_marginal": g.cost_marginal, "cost_noload": g.cost_noload,
                "cost_startup": g.cost_startup,
                **({"ramp": g.ramp} if g.ramp is not None else {}),
                "min_up": g.min_up, "min_down": g.min_down,
            }
            for g in case.gens
        ],
        "ibrs": [
            {"id": c.id, "name": c.name, "bus": c.bus, "capacity": c.capacity,
             "fault_current": c.fault_current, "availability": list(c.availability)}
            for c in case.ibrs
        ],
        "demand": {str(b): case.demand[b].tolist()
                   for b in range(case.n_bus) if np.any(case.demand[b] > 0)},
        "scc_limits": {str(k): v for k, v in sorted(case.scc_limits.items())},
    }


def load_case(path: str | Path) -> NetworkCase:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CaseError(f"{path}: invalid JSON ({exc})") from exc
    return case_from_dict(doc)


def save_case(case: NetworkCase, path: str | Path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(case), indent=1) + "\n")


def bundled_case_path(name: str = "ieee39") -> Path:
    return Path(str(resources.files("sccprice.data").joinpath(f"{name}.json")))


def load_bundled(name: str = "ieee39") -> NetworkCase:
    """Load a case shipped with the package (``ieee39`` or ``micro3``)."""
    return load_case(bundled_case_path(name))


def with_limits(case: NetworkCase, limits: Mapping[int, float]) -> NetworkCase:
    """Copy of ``case`` with some SCC limits replaced."""
    merged = dict(case.scc_limits)
    merged.update({int(k): float(v) for k, v in limits.items()})
    return NetworkCase(
        buses=case.buses, lines=case.lines, gens=case.gens, ibrs=case.ibrs,
        demand=case.demand, scc_limits=merged, base_mva=case.base_mva,
        shed_cost=case.shed_cost, horizon=case.horizon, name=case.name,
    )
