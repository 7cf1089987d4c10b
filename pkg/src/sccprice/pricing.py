"""SCC prices from unit commitment: dispatchable, restricted and marginal-unit.

Sign convention: every price is reported as the increase of the minimized
cost per unit increase of the SCC requirement, so a binding SCC row gives a
nonnegative sink price.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .case import NetworkCase
from .grid import GridError, z_row_weights
from .opt import DEFAULT_OPTIONS, SolverOptions, solve_lp
from .uc import (
    InvariantError, UcConfig, UcInfeasibleError, UcSolution, _fmt, build_dispatchable, solve_uc,
)

log = logging.getLogger(__name__)

METHODS = ("dispatchable", "restricted", "marginal")
FD_DELTA = 1e-3
FD_TOL = 0.05
BINDING_TOL = 1e-8
CONSERVATION_TOL = 1e-9


@dataclass
class PriceReport:
    method: str
    sink: int
    source_names: list[str]
    sink_price: np.ndarray  # (T,)
    source_price: np.ndarray  # (S, T) allocated p^{E->F}
    payments: np.ndarray  # (S, T) in currency per hour
    online: np.ndarray  # (S, T) online fraction of each source
    base_objective: float
    lambda_commit: np.ndarray | None = None  # (G, T)
    p_unit: np.ndarray | None = None  # (S,)
    source_objectives: np.ndarray | None = None  # (S,)
    degenerate_hours: list[int] = field(default_factory=list)
    fd_prices: dict[int, float] = field(default_factory=dict)
    infeasible_absorbed: list[str] = field(default_factory=list)
    p_unit_hourly: np.ndarray | None = None  # (S, T), optional per-hour variant
    solution: UcSolution | None = field(default=None, repr=False, compare=False)

    @property
    def horizon(self) -> int:
        return len(self.sink_price)

    @property
    def daily_average_price(self) -> float:
        return float(self.sink_price.mean())

    @property
    def daily_payments(self) -> np.ndarray:
        return self.payments.mean(axis=1)

    @property
    def volatility(self) -> float | None:
        """max/median of the nonzero |lambda_commit| entries."""
        if self.lambda_commit is None:
            return None
        mags = np.abs(self.lambda_commit)
        nz = mags[mags > 1e-9]
        if nz.size == 0:
            return 0.0
        return float(nz.max() / np.median(nz))

    def check_invariants(self) -> None:
        diff = np.abs(self.source_price.sum(axis=0) - self.sink_price)
        # allocation is skipped (all zero) when the sink price is zero
        if np.any(diff > CONSERVATION_TOL * np.maximum(1.0, np.abs(self.sink_price))):
            raise InvariantError(f"allocated prices do not sum to the sink price (max gap {diff.max():.3g})")
        if np.any(self.payments < 0):
            raise InvariantError("negative payment")
        if np.any((self.online <= 0) & (self.payments != 0)):
            raise InvariantError("offline source receives a payment")
        if self.p_unit is not None and np.any(self.p_unit < -1e-6):
            bad = [self.source_names[i] for i in np.flatnonzero(self.p_unit < -1e-6)]
            raise InvariantError(f"negative marginal-unit price for {bad}")
        unflagged = [t for t, fd in self.fd_prices.items()
                     if t not in self.degenerate_hours and not _close(fd, self.sink_price[t])]
        if unflagged:
            raise InvariantError(f"dual and finite difference disagree at hours {unflagged}")

    def summary(self) -> dict:
        doc = {
            "method": self.method,
            "sink": self.sink,
            "sources": list(self.source_names),
            "base_objective": _num(self.base_objective),
            "daily_average_price": _num(self.daily_average_price),
            "daily_payments": [_num(v) for v in self.daily_payments],
            "degenerate_hours": list(self.degenerate_hours),
            "infeasible_absorbed": list(self.infeasible_absorbed),
        }
        if self.lambda_commit is not None:
            doc["volatility"] = _num(self.volatility)
            doc["lambda_scc_max_abs"] = _num(np.abs(self.sink_price).max(initial=0.0))
        if self.p_unit is not None:
            doc["p_unit"] = [_num(v) for v in self.p_unit]
            doc["source_objectives"] = [_num(v) for v in self.source_objectives]
        if self.p_unit_hourly is not None:
            doc["p_unit_hourly"] = [[_num(v) for v in row] for row in self.p_unit_hourly]
        return doc

    def hour_rows(self) -> list[dict]:
        rows = []
        for t in range(self.horizon):
            r = {"hour": t, "sink_price": _fmt(self.sink_price[t])}
            for i, name in enumerate(self.source_names):
                r[f"price_{name}"] = _fmt(self.source_price[i, t])
            for i, name in enumerate(self.source_names):
                r[f"payment_{name}"] = _fmt(self.payments[i, t])
            if self.lambda_commit is not None:
                for g in range(self.lambda_commit.shape[0]):
                    r[f"lambda_commit_{self.source_names[g]}"] = _fmt(self.lambda_commit[g, t])
            r["degenerate"] = int(t in self.degenerate_hours)
            rows.append(r)
        return rows

    def to_csv(self, path: str | Path) -> None:
        rows = self.hour_rows()
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=1, sort_keys=True) + "\n")


def _num(v) -> float | None:
    if v is None:
        return None
    v = float(v)
    return round(v, 9) + 0.0


def _close(a: float, b: float, tol: float = FD_TOL) -> bool:
    scale = max(abs(a), abs(b))
    return scale <= 1e-9 or abs(a - b) <= tol * scale


def _online(case: NetworkCase, sol: UcSolution) -> np.ndarray:
    return np.vstack([np.clip(sol.x, 0.0, 1.0), sol.alpha]) if case.n_ibr else np.clip(sol.x, 0.0, 1.0)


def allocate(case: NetworkCase, sink: int, price: float, x_t: np.ndarray, alpha_t: np.ndarray
             ) -> tuple[np.ndarray, np.ndarray]:
    """Split one hour's sink price over sources by |Z_FE I_E| and compute payments.

    Returns (allocated prices, payments) per source (SGs then IBRs).
    Payments are p^{E->F} * |Z_FE| / |Z_FF| * I_E with I_E scaled by the
    source's online fraction.
    """
    S = case.n_gen + case.n_ibr
    if price == 0 or (not np.any(x_t > 0) and not np.any(alpha_t > 0)):
        return np.zeros(S), np.zeros(S)
    try:
        contrib = z_row_weights(case, np.clip(x_t, 0.0, 1.0), sink, alpha_t)
    except GridError:
        log.warning("sink %s: impedance unavailable for allocation; assigning zero weights", sink)
        return np.zeros(S), np.zeros(S)
    w = np.abs(contrib.all_terms)
    total = w.sum()
    if total == 0:
        return np.zeros(S), np.zeros(S)
    alloc = price * w / total
    # residual from floating point goes to the largest share so the sum is exact
    alloc[int(np.argmax(w))] += price - alloc.sum()
    i_e = np.concatenate([[g.fault_current for g in case.gens], [c.fault_current for c in case.ibrs]])
    online = np.concatenate([x_t, alpha_t])
    z = np.abs(np.concatenate([contrib.z_sg, contrib.z_ibr]))
    pay = np.where(w > 0, alloc * z / abs(contrib.z_ff) * i_e * online, 0.0)
    return alloc, np.maximum(pay, 0.0)


def _allocate_all(case: NetworkCase, sink: int, prices: np.ndarray, sol: UcSolution):
    S, T = case.n_gen + case.n_ibr, case.horizon
    alloc = np.zeros((S, T))
    pay = np.zeros((S, T))
    for t in range(T):
        alloc[:, t], pay[:, t] = allocate(case, sink, float(prices[t]), sol.x[:, t], sol.alpha[:, t])
    return alloc, pay


def _sink_config(case: NetworkCase, config: UcConfig | None, sink: int | None) -> UcConfig:
    config = config or UcConfig(active_sink=sink)
    if sink is not None and config.active_sink != sink:
        config = replace(config, active_sink=sink)
    if config.active_sink is None:
        raise ValueError("pricing needs an active sink")
    return config


def price_dispatchable(case: NetworkCase, coeffs, config: UcConfig | None = None, sink: int | None = None,
                       options: SolverOptions = DEFAULT_OPTIONS, fd_check: bool = True) -> PriceReport:
    """Sink price = dual of each hour's SCC row in the relaxed-commitment LP."""
    config = replace(_sink_config(case, config, sink), variant="dispatchable", include_scc=True)
    sol = solve_uc(case, coeffs, config, options)
    f = config.active_sink
    prices = np.array([max(sol.dual(r), 0.0) if sol.row_slack(r) <= BINDING_TOL else 0.0
                       for r in sol.scc_rows])
    raw = np.array([sol.dual(r) for r in sol.scc_rows])
    degenerate: list[int] = []
    if sol.lp.degenerate_rows is not None:
        rows = [sol.program.row(r) for r in sol.scc_rows]
        degenerate = [t for t, i in enumerate(rows) if sol.lp.degenerate_rows[i]]
    if np.any(np.abs(raw - prices) > 1e-9):
        log.warning("sink %s: SCC duals with wrong sign or on slack rows were zeroed", f)
    fd: dict[int, float] = {}
    if fd_check:
        program = build_dispatchable(case, coeffs, config)
        backend = options.lp_backend(program)
        for t in np.flatnonzero(prices > 1e-9):
            i = program.row(f"scc[{t}]")
            rhs = program.b.copy()
            rhs[i] += FD_DELTA
            bumped = solve_lp(program.with_rhs(rhs), backend)
            if not bumped.optimal:
                degenerate.append(int(t))
                continue
            fd[int(t)] = (bumped.objective - sol.objective) / FD_DELTA
            if not _close(fd[int(t)], prices[t]):
                log.info("hour %d: dual %.6g vs finite difference %.6g, flagged degenerate",
                         t, prices[t], fd[int(t)])
                degenerate.append(int(t))
    alloc, pay = _allocate_all(case, f, prices, sol)
    report = PriceReport("dispatchable", f, case.source_names(), prices, alloc, pay,
                         _online(case, sol), sol.objective, degenerate_hours=sorted(set(degenerate)),
                         fd_prices=fd)
    report.solution = sol
    return report


def price_restricted(case: NetworkCase, coeffs, config: UcConfig | None = None, sink: int | None = None,
                     options: SolverOptions = DEFAULT_OPTIONS,
                     base: UcSolution | None = None) -> PriceReport:
    """Duals of the LP with commitments pinned at the MILP optimum."""
    config = replace(_sink_config(case, config, sink), include_scc=True)
    if base is None:
        base = solve_uc(case, coeffs, replace(config, variant="milp"), options)
    rconf = replace(config, variant="restricted", fixed_commitment=base.x)
    sol = solve_uc(case, coeffs, rconf, options)
    if abs(sol.objective - base.objective) > 1e-7 * max(1.0, abs(base.objective)):
        raise InvariantError(f"restricted LP objective {sol.objective} != MILP {base.objective}")
    f = config.active_sink
    prices = np.array([sol.dual(r) for r in sol.scc_rows])
    G, T = case.n_gen, case.horizon
    lam = np.array([[sol.dual(f"commit[{g},{t}]") for t in range(T)] for g in range(G)])
    alloc, pay = _allocate_all(case, f, np.maximum(prices, 0.0), sol)
    degenerate = []
    if sol.lp.degenerate_rows is not None:
        degenerate = [t for t, r in enumerate(sol.scc_rows)
                      if sol.lp.degenerate_rows[sol.program.row(r)]]
    report = PriceReport("restricted", f, case.source_names(), prices, alloc, pay, _online(case, sol),
                         sol.objective, lambda_commit=lam, degenerate_hours=degenerate)
    report.solution = sol
    return report


def _resolve(case, coeffs, config, options, slack_cost):
    try:
        return solve_uc(case, coeffs, config, options), False
    except UcInfeasibleError:
        return solve_uc(case, coeffs, replace(config, scc_slack=slack_cost), options), True


def price_marginal_unit(case: NetworkCase, coeffs, config: UcConfig | None = None,
                        sources: Sequence[int] | None = None, sink: int | None = None,
                        options: SolverOptions = DEFAULT_OPTIONS, jobs: int = 1,
                        keep_pairs: bool = False, hourly: bool = False,
                        base: UcSolution | None = None) -> PriceReport:
    """p_unit(E) = f*_E - f*, where f*_E re-solves the MILP without E's SCC terms.

    ``sources`` index SGs first then IBRs. A re-solve that turns infeasible is
    repeated with a shortfall variable on every SCC row priced at
    shed_cost * base_mva per p.u.; the source is listed in
    ``infeasible_absorbed``. With ``hourly`` the removal is also done one hour
    at a time.
    """
    config = replace(_sink_config(case, config, sink), include_scc=True, variant="milp")
    G, C = case.n_gen, case.n_ibr
    S = G + C
    sources = list(range(S)) if sources is None else sorted(set(int(s) for s in sources))
    if base is None:
        base = solve_uc(case, coeffs, config, options)
    k = base.coeffs
    slack_cost = case.shed_cost * case.base_mva

    def removal(e: int, hours=None) -> UcConfig:
        gens, ibrs = ((e,), ()) if e < G else ((), (e - G,))
        return replace(config, removed_gens=gens, removed_ibrs=ibrs, removed_hours=hours,
                       keep_pairs=keep_pairs)

    def trivial(e: int) -> bool:
        z = k.zeroed(*(((e,), ()) if e < G else ((), (e - G,))), drop_pairs=not keep_pairs)
        return np.array_equal(z.vector, k.vector)

    def job(args):
        e, hours = args
        if trivial(e):
            return base.objective, False
        sol, absorbed = _resolve(case, coeffs, removal(e, hours), options, slack_cost)
        return sol.objective, absorbed

    tasks = [(e, None) for e in sources]
    if hourly:
        tasks += [(e, (t,)) for e in sources for t in range(case.horizon)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, tasks))
    else:
        results = [job(t) for t in tasks]

    f_e = np.full(S, base.objective)
    absorbed = []
    names = case.source_names()
    for (e, _), (obj, flag) in zip(tasks[:len(sources)], results[:len(sources)]):
        f_e[e] = obj
        if flag:
            absorbed.append(names[e])
    hourly_p = None
    if hourly:
        hourly_p = np.zeros((S, case.horizon))
        for (e, hrs), (obj, flag) in zip(tasks[len(sources):], results[len(sources):]):
            hourly_p[e, hrs[0]] = obj - base.objective
            if flag and f"{names[e]}@{hrs[0]}" not in absorbed:
                absorbed.append(f"{names[e]}@{hrs[0]}")
    p_unit = f_e - base.objective
    zeros = np.zeros((S, case.horizon))
    report = PriceReport("marginal", config.active_sink, names, np.zeros(case.horizon), zeros.copy(),
                         zeros.copy(), _online(case, base), base.objective, p_unit=p_unit,
                         source_objectives=f_e, infeasible_absorbed=absorbed, p_unit_hourly=hourly_p)
    report.solution = base
    return report


def price(method: str, case: NetworkCase, coeffs, sink: int, options: SolverOptions = DEFAULT_OPTIONS,
          jobs: int = 1, **kw) -> PriceReport:
    if method == "dispatchable":
        return price_dispatchable(case, coeffs, sink=sink, options=options, **kw)
    if method == "restricted":
        return price_restricted(case, coeffs, sink=sink, options=options, **kw)
    if method == "marginal":
        return price_marginal_unit(case, coeffs, sink=sink, options=options, jobs=jobs, **kw)
    raise ValueError(f"unknown pricing method {method!r}; expected one of {METHODS}")


def payments_table(reports: Sequence[PriceReport]) -> tuple[list[int], list[str], np.ndarray]:
    """Daily mean payment matrix, rows = sinks, columns = sources."""
    if not reports:
        return [], [], np.zeros((0, 0))
    names = reports[0].source_names
    return [r.sink for r in reports], list(names), np.vstack([r.daily_payments for r in reports])


def write_payments_table(reports: Sequence[PriceReport], path: str | Path) -> None:
    sinks, names, mat = payments_table(reports)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sink"] + names)
        for f, row in zip(sinks, mat):
            w.writerow([f] + [_fmt(v) for v in row])
