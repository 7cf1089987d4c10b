"""SCC-constrained unit commitment over a deterministic hourly horizon.

Per hour t the program carries, for every generator g, the commitment
x[g,t], startup indicator s[g,t] and output p[g,t]; every IBR c has an
online fraction alpha[c,t]; shed[t] is unserved load; eta[m,t] stands in for
the product x[g1,t] * x[g2,t] of generator pair m. Balance is copper plate.
The SCC row of the active sink reads

    sum_g k_g x[g,t] + sum_c k_c alpha[c,t] + sum_m k_m eta[m,t] >= limit.

Row names follow ``kind[index,t]`` (``scc[t]``, ``balance[t]``,
``commit[g,t]``, ...) so duals can be fetched by name.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .case import NetworkCase
from .fit import CoefficientSet, pair_index
from .grid import compute_scc
from .opt import (
    EQ, GE, LE, DEFAULT_OPTIONS, LinearProgram, LpSolution, MixedProgram, ProgramBuilder,
    SolverOptions, solve_with,
)

VARIANTS = ("milp", "dispatchable", "restricted")
BALANCE_TOL = 1e-6  # MW


class UcError(ValueError):
    pass


class UcInfeasibleError(RuntimeError):
    def __init__(self, message: str, status: str):
        super().__init__(message)
        self.status = status


class InvariantError(AssertionError):
    pass


@dataclass(frozen=True)
class UcConfig:
    """What to build.

    ``removed_gens``/``removed_ibrs`` drop those sources from the SCC rows
    (only in ``removed_hours`` when given); with ``keep_pairs`` False the
    pair terms of removed generators go too. ``scc_slack`` adds a penalized
    shortfall variable to each SCC row (cost per p.u. per hour).
    """

    active_sink: int | None = None
    include_scc: bool = True
    variant: str = "milp"
    fixed_commitment: np.ndarray | None = None
    initial_state: tuple[int, ...] | None = None
    limit: float | None = None
    ramp: bool = False
    min_up_down: bool = False
    removed_gens: tuple[int, ...] = ()
    removed_ibrs: tuple[int, ...] = ()
    removed_hours: tuple[int, ...] | None = None
    keep_pairs: bool = False
    scc_slack: float | None = None

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise UcError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.variant == "restricted" and self.fixed_commitment is None:
            raise UcError("restricted variant needs fixed_commitment")
        if self.include_scc and self.active_sink is None:
            raise UcError("an active sink is required when the SCC row is included")

    @property
    def with_scc(self) -> bool:
        return self.include_scc and self.active_sink is not None


def _resolve_coeffs(case: NetworkCase, coeffs, config: UcConfig) -> CoefficientSet | None:
    if not config.with_scc:
        return None
    sink = config.active_sink
    if isinstance(coeffs, CoefficientSet):
        found = coeffs if coeffs.sink == sink else None
    elif isinstance(coeffs, Mapping):
        found = coeffs.get(sink)
    else:
        found = next((k for k in coeffs or () if k.sink == sink), None)
    if found is None:
        raise UcError(f"no coefficients for active sink {sink}")
    if len(found.k_g) != case.n_gen or len(found.k_c) != case.n_ibr:
        raise UcError("coefficient dimensions do not match the case")
    return found


def _limit(case: NetworkCase, coeffs: CoefficientSet, config: UcConfig) -> float:
    if config.limit is not None:
        return float(config.limit)
    return float(case.scc_limits.get(coeffs.sink, coeffs.limit))


def _hour_coeffs(coeffs: CoefficientSet, config: UcConfig, t: int) -> CoefficientSet:
    if not (config.removed_gens or config.removed_ibrs):
        return coeffs
    if config.removed_hours is not None and t not in config.removed_hours:
        return coeffs
    return coeffs.zeroed(config.removed_gens, config.removed_ibrs, drop_pairs=not config.keep_pairs)


def _build(case: NetworkCase, coeffs, config: UcConfig) -> tuple[ProgramBuilder, CoefficientSet | None]:
    k = _resolve_coeffs(case, coeffs, config)
    G, C, T = case.n_gen, case.n_ibr, case.horizon
    if config.fixed_commitment is not None:
        xstar = np.asarray(config.fixed_commitment, dtype=float)
        if xstar.shape != (G, T):
            raise UcError(f"fixed_commitment must have shape ({G}, {T})")
        if np.any((xstar != 0) & (xstar != 1)):
            raise UcError("fixed_commitment must be integral")
    x0 = np.zeros(G) if config.initial_state is None else np.asarray(config.initial_state, float)
    if x0.shape != (G,):
        raise UcError("initial_state length must equal the number of generators")
    variant = config.variant
    pairs = pair_index(G)
    use_eta = config.with_scc and variant != "dispatchable"
    avail = case.availability()
    demand = case.total_demand

    b = ProgramBuilder()
    x = np.zeros((G, T), dtype=int)
    s = np.zeros((G, T), dtype=int)
    p = np.zeros((G, T), dtype=int)
    a = np.zeros((C, T), dtype=int)
    shed = np.zeros(T, dtype=int)
    eta = np.zeros((len(pairs), T), dtype=int)
    for t in range(T):
        for g, gen in enumerate(case.gens):
            if variant == "restricted":
                x[g, t] = b.add_var(f"x[{g},{t}]", -np.inf, np.inf, gen.cost_noload)
            else:
                x[g, t] = b.add_var(f"x[{g},{t}]", 0.0, 1.0, gen.cost_noload,
                                    binary=variant == "milp")
            # bounds that duplicate rows would make the pin duals degenerate;
            # with nonnegative startup cost s settles at max(0, x_t - x_{t-1})
            s[g, t] = b.add_var(f"s[{g},{t}]", 0.0, np.inf if variant == "restricted" else 1.0,
                                gen.cost_startup)
            p[g, t] = b.add_var(f"p[{g},{t}]", 0.0, np.inf if variant == "restricted" else gen.p_max,
                                gen.cost_marginal)
        for c in range(C):
            a[c, t] = b.add_var(f"alpha[{c},{t}]", 0.0, float(avail[c, t]))
        shed[t] = b.add_var(f"shed[{t}]", 0.0, float(demand[t]), case.shed_cost)
        if use_eta:
            for m, (g1, g2) in enumerate(pairs):
                if variant == "restricted":
                    v = float(xstar[g1, t] * xstar[g2, t])
                    eta[m, t] = b.add_var(f"eta[{m},{t}]", v, v)
                else:
                    eta[m, t] = b.add_var(f"eta[{m},{t}]", 0.0, 1.0)

    for t in range(T):
        for g, gen in enumerate(case.gens):
            b.add_row(f"pmax[{g},{t}]", {p[g, t]: 1.0, x[g, t]: -gen.p_max}, LE, 0.0)
            if gen.p_min > 0:
                b.add_row(f"pmin[{g},{t}]", {p[g, t]: 1.0, x[g, t]: -gen.p_min}, GE, 0.0)
            if t == 0:
                b.add_row(f"startup[{g},{t}]", {s[g, t]: 1.0, x[g, t]: -1.0}, GE, -x0[g])
            else:
                b.add_row(f"startup[{g},{t}]", {s[g, t]: 1.0, x[g, t]: -1.0, x[g, t - 1]: 1.0}, GE, 0.0)
            if variant == "restricted":
                b.add_row(f"commit[{g},{t}]", {x[g, t]: 1.0}, EQ, float(xstar[g, t]))
        bal = {p[g, t]: 1.0 for g in range(G)}
        bal.update({a[c, t]: case.ibrs[c].capacity for c in range(C)})
        bal[shed[t]] = 1.0
        b.add_row(f"balance[{t}]", bal, EQ, float(demand[t]))
        if use_eta and variant == "milp":
            for m, (g1, g2) in enumerate(pairs):
                b.add_row(f"eta_a[{m},{t}]", {eta[m, t]: 1.0, x[g1, t]: -1.0}, LE, 0.0)
                b.add_row(f"eta_b[{m},{t}]", {eta[m, t]: 1.0, x[g2, t]: -1.0}, LE, 0.0)
                b.add_row(f"eta_c[{m},{t}]", {eta[m, t]: 1.0, x[g1, t]: -1.0, x[g2, t]: -1.0}, GE, -1.0)
        if k is not None:
            kt = _hour_coeffs(k, config, t)
            row = {x[g, t]: kt.k_g[g] for g in range(G)}
            row.update({a[c, t]: kt.k_c[c] for c in range(C)})
            if use_eta:
                for m in range(len(pairs)):
                    row[eta[m, t]] = row.get(eta[m, t], 0.0) + kt.k_m[m]
            if config.scc_slack is not None:
                row[b.add_var(f"sccslack[{t}]", 0.0, np.inf, config.scc_slack)] = 1.0
            b.add_row(f"scc[{t}]", row, GE, _limit(case, k, config))

    if config.ramp:
        for g, gen in enumerate(case.gens):
            if gen.ramp is None:
                continue
            for t in range(1, T):
                b.add_row(f"rampup[{g},{t}]", {p[g, t]: 1.0, p[g, t - 1]: -1.0}, LE, gen.ramp)
                b.add_row(f"rampdn[{g},{t}]", {p[g, t - 1]: 1.0, p[g, t]: -1.0}, LE, gen.ramp)
    if config.min_up_down:
        for g, gen in enumerate(case.gens):
            for t in range(T):
                if gen.min_up > 1:
                    row = {s[g, tau]: 1.0 for tau in range(max(0, t - gen.min_up + 1), t + 1)}
                    row[x[g, t]] = row.get(x[g, t], 0.0) - 1.0
                    b.add_row(f"minup[{g},{t}]", row, LE, 0.0)
                if gen.min_down > 1 and t >= gen.min_down:
                    row = {s[g, tau]: 1.0 for tau in range(t - gen.min_down + 1, t + 1)}
                    row[x[g, t - gen.min_down]] = 1.0
                    b.add_row(f"mindn[{g},{t}]", row, LE, 1.0)
    return b, k


def build_uc(case: NetworkCase, coeffs, config: UcConfig) -> MixedProgram:
    """Mixed-binary UC program; binaries are the commitments x[g,t]."""
    if config.variant != "milp":
        config = replace(config, variant="milp")
    b, _ = _build(case, coeffs, config)
    return b.build_mixed()


def build_dispatchable(case: NetworkCase, coeffs, config: UcConfig) -> LinearProgram:
    """LP with commitments relaxed to [0, 1] and no pair terms in the SCC rows."""
    b, _ = _build(case, coeffs, replace(config, variant="dispatchable"))
    return b.build()


def build_restricted(case: NetworkCase, coeffs, config: UcConfig) -> LinearProgram:
    """LP with commitments pinned to x* by named ``commit[g,t]`` equality rows.

    The x bounds are freed so each pin's dual carries the full value of its
    commitment; eta is fixed to the products of x*.
    """
    b, _ = _build(case, coeffs, replace(config, variant="restricted"))
    return b.build()


@dataclass
class UcSolution:
    case: NetworkCase = field(repr=False)
    config: UcConfig
    program: LinearProgram = field(repr=False)
    lp: LpSolution = field(repr=False)
    coeffs: CoefficientSet | None
    x: np.ndarray
    s: np.ndarray
    p: np.ndarray
    alpha: np.ndarray
    shed: np.ndarray
    eta: np.ndarray | None
    objective: float

    @property
    def duals(self) -> np.ndarray | None:
        return self.lp.duals

    def dual(self, row: str) -> float:
        return float(self.lp.duals[self.program.row(row)])

    def row_slack(self, row: str) -> float:
        i = self.program.row(row)
        return float((self.program.A[i] @ self.lp.x)[0] - self.program.b[i])

    @property
    def scc_rows(self) -> list[str]:
        return [n for n in self.program.row_names if n.startswith("scc[")]

    @property
    def commit_rows(self) -> list[str]:
        return [n for n in self.program.row_names if n.startswith("commit[")]

    def cost(self) -> float:
        """Objective re-evaluated from the solution arrays."""
        case = self.case
        total = case.shed_cost * float(self.shed.sum())
        for g, gen in enumerate(case.gens):
            total += (gen.cost_marginal * self.p[g].sum() + gen.cost_noload * self.x[g].sum()
                      + gen.cost_startup * self.s[g].sum())
        if self.config.scc_slack is not None and self.config.with_scc:
            total += self.config.scc_slack * float(self.scc_shortfall.sum())
        return float(total)

    @property
    def scc_shortfall(self) -> np.ndarray:
        idx = [self.program._var_index.get(f"sccslack[{t}]") for t in range(self.case.horizon)]
        return np.array([0.0 if j is None else self.lp.x[j] for j in idx])

    def linearized_scc(self) -> np.ndarray | None:
        """Per-hour linearized SCC of the full coefficient set (pair terms included)."""
        if self.coeffs is None:
            return None
        k = self.coeffs
        out = np.empty(self.case.horizon)
        for t in range(self.case.horizon):
            xt = self.x[:, t]
            prod = np.array([xt[i] * xt[j] for i, j in k.pairs])
            out[t] = k.k_g @ xt + k.k_c @ self.alpha[:, t] + (k.k_m @ prod if prod.size else 0.0)
        return out

    def exact_scc(self, sink: int | None = None) -> np.ndarray:
        """Per-hour exact SCC at ``sink`` from the solved x and alpha."""
        sink = self.config.active_sink if sink is None else sink
        if sink is None:
            raise UcError("no sink given")
        x = np.clip(self.x, 0.0, 1.0)
        return np.array([compute_scc(self.case, x[:, t], self.alpha[:, t], sink)
                         for t in range(self.case.horizon)])

    def check_invariants(self) -> None:
        case = self.case
        gen_mw = self.p.sum(axis=0) + np.array([c.capacity for c in case.ibrs]) @ self.alpha \
            if case.n_ibr else self.p.sum(axis=0)
        resid = np.abs(gen_mw + self.shed - case.total_demand)
        if resid.max(initial=0.0) > BALANCE_TOL:
            raise InvariantError(f"power balance residual {resid.max():.3g} MW")
        if np.any(self.shed < -BALANCE_TOL) or np.any(self.shed > case.total_demand + BALANCE_TOL):
            raise InvariantError("load shedding outside [0, demand]")
        c = self.cost()
        if abs(c - self.objective) > 1e-6 * max(1.0, abs(self.objective)):
            raise InvariantError(f"objective {self.objective} != re-evaluated cost {c}")
        if self.config.variant == "milp" and self.eta is not None:
            k = self.coeffs
            for m, (g1, g2) in enumerate(k.pairs):
                if np.any(np.abs(self.eta[m] - self.x[g1] * self.x[g2]) > 1e-9):
                    raise InvariantError(f"eta[{m}] differs from x[{g1}]*x[{g2}]")

    def hour_rows(self, sinks: Sequence[int] | None = None) -> list[dict]:
        case = self.case
        lin = self.linearized_scc()
        sinks = [self.config.active_sink] if sinks is None and self.config.active_sink is not None \
            else list(sinks or [])
        exact = {f: self.exact_scc(f) for f in sinks}
        rows = []
        for t in range(case.horizon):
            r = {"hour": t}
            for g, gen in enumerate(case.gens):
                r[f"x_{gen.name}"] = _fmt(self.x[g, t])
            for g, gen in enumerate(case.gens):
                r[f"p_{gen.name}"] = _fmt(self.p[g, t])
            for c, ibr in enumerate(case.ibrs):
                r[f"alpha_{ibr.name}"] = _fmt(self.alpha[c, t])
            r["shed"] = _fmt(self.shed[t])
            r["scc_linearized"] = "" if lin is None else _fmt(lin[t])
            for f in sinks:
                r[f"scc_exact_{f}"] = _fmt(exact[f][t])
            rows.append(r)
        return rows

    def to_csv(self, path: str | Path, sinks: Sequence[int] | None = None) -> None:
        write_rows(path, self.hour_rows(sinks))


def _fmt(v: float) -> str:
    v = float(v)
    if v == 0:
        v = 0.0  # drop negative zero
    r = round(v, 9)
    return repr(r + 0.0)


def write_rows(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def build_program(case: NetworkCase, coeffs, config: UcConfig) -> LinearProgram | MixedProgram:
    if config.variant == "milp":
        return build_uc(case, coeffs, config)
    if config.variant == "dispatchable":
        return build_dispatchable(case, coeffs, config)
    return build_restricted(case, coeffs, config)


def solve_uc(case: NetworkCase, coeffs, config: UcConfig,
             options: SolverOptions = DEFAULT_OPTIONS, check: bool = True) -> UcSolution:
    """Build and solve one variant; raises UcInfeasibleError on failure."""
    program = build_program(case, coeffs, config)
    lp = program.lp if isinstance(program, MixedProgram) else program
    sol = solve_with(options, program)
    if not sol.optimal:
        raise UcInfeasibleError(f"{config.variant} UC is {sol.status}", sol.status)
    k = _resolve_coeffs(case, coeffs, config)
    G, C, T = case.n_gen, case.n_ibr, case.horizon
    v = sol.x

    def grab(fmt: str, n: int) -> np.ndarray:
        return np.array([[v[lp.var(fmt.format(i, t))] for t in range(T)] for i in range(n)]).reshape(n, T)

    xs = grab("x[{},{}]", G)
    if config.variant == "milp":
        xs = np.round(xs)
    eta = None
    if config.with_scc and config.variant != "dispatchable":
        eta = grab("eta[{},{}]", G * (G - 1) // 2)
    out = UcSolution(
        case=case, config=config, program=lp, lp=sol, coeffs=k,
        x=xs, s=grab("s[{},{}]", G), p=grab("p[{},{}]", G), alpha=grab("alpha[{},{}]", C),
        shed=np.array([v[lp.var(f"shed[{t}]")] for t in range(T)]), eta=eta,
        objective=float(sol.objective),
    )
    if check:
        out.check_invariants()
    return out
