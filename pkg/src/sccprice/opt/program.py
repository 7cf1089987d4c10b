"""Program containers, solutions and optimality checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = "<=", "=", ">="
SENSES = (LE, EQ, GE)


class SolverError(RuntimeError):
    pass


class IterationLimitError(SolverError):
    def __init__(self, message: str, iterations: int, objective: float | None = None):
        super().__init__(message)
        self.iterations = iterations
        self.objective = objective


class NodeBudgetError(SolverError):
    """Branch-and-bound stopped before proving optimality."""

    def __init__(self, message: str, incumbent: "LpSolution | None", bound: float, nodes: int):
        super().__init__(message)
        self.incumbent = incumbent
        self.bound = bound
        self.nodes = nodes


@dataclass(eq=False)
class LinearProgram:
    """min c.x + offset  s.t.  A x (sense) b,  lb <= x <= ub.

    ``A`` is stored sparse for assembly; the native solver densifies it.
    """

    c: np.ndarray
    A: sp.csr_matrix
    senses: tuple[str, ...]
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    var_names: tuple[str, ...] = ()
    row_names: tuple[str, ...] = ()
    obj_offset: float = 0.0

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        self.A = sp.csr_matrix(self.A, dtype=float)
        if self.A.shape[0] == 0:
            self.A = sp.csr_matrix((0, n))
        m = self.A.shape[0]
        if self.A.shape[1] != n:
            raise ValueError(f"A has {self.A.shape[1]} columns, c has {n}")
        self.b = np.asarray(self.b, dtype=float).reshape(m)
        self.senses = tuple(self.senses)
        if len(self.senses) != m or any(s not in SENSES for s in self.senses):
            raise ValueError("need one sense in (<=, =, >=) per row")
        self.lb = np.broadcast_to(np.asarray(self.lb, dtype=float), (n,)).copy()
        self.ub = np.broadcast_to(np.asarray(self.ub, dtype=float), (n,)).copy()
        if np.any(self.lb > self.ub):
            bad = int(np.argmax(self.lb > self.ub))
            raise ValueError(f"variable {bad}: lower bound exceeds upper bound")
        if not self.var_names:
            self.var_names = tuple(f"x{j}" for j in range(n))
        if not self.row_names:
            self.row_names = tuple(f"r{i}" for i in range(m))
        if len(self.var_names) != n or len(self.row_names) != m:
            raise ValueError("name lists do not match dimensions")
        self._row_index = {name: i for i, name in enumerate(self.row_names)}
        self._var_index = {name: j for j, name in enumerate(self.var_names)}

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def row(self, name: str) -> int:
        return self._row_index[name]

    def var(self, name: str) -> int:
        return self._var_index[name]

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "LinearProgram":
        return LinearProgram(self.c, self.A, self.senses, self.b, lb, ub,
                             self.var_names, self.row_names, self.obj_offset)

    def with_rhs(self, b: np.ndarray) -> "LinearProgram":
        return LinearProgram(self.c, self.A, self.senses, b, self.lb, self.ub,
                             self.var_names, self.row_names, self.obj_offset)


@dataclass(eq=False)
class MixedProgram:
    lp: LinearProgram
    binaries: np.ndarray

    def __post_init__(self) -> None:
        self.binaries = np.asarray(sorted(set(int(j) for j in self.binaries)), dtype=int)
        n = self.lp.n_vars
        if self.binaries.size and (self.binaries.min() < 0 or self.binaries.max() >= n):
            raise ValueError("binary index out of range")
        if np.any(self.lp.lb[self.binaries] < 0) or np.any(self.lp.ub[self.binaries] > 1):
            raise ValueError("binary variables must be bounded within [0, 1]")


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float = np.nan
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    degenerate: bool = False
    degenerate_rows: np.ndarray | None = None
    nodes: int = 0
    bound: float = np.nan
    backend: str = ""
    row_names: tuple[str, ...] = field(default=(), repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def dual(self, row_name: str) -> float:
        return float(self.duals[self.row_names.index(row_name)])


class ProgramBuilder:
    """Incremental assembly of a LinearProgram from named variables and rows."""

    def __init__(self) -> None:
        self._c: list[float] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._names: list[str] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []
        self._binaries: list[int] = []
        self.index: dict[str, int] = {}

    def add_var(self, name: str, lb: float = 0.0, ub: float = np.inf, cost: float = 0.0,
                binary: bool = False) -> int:
        j = len(self._c)
        self._c.append(cost)
        self._lb.append(lb)
        self._ub.append(ub)
        self._names.append(name)
        self.index[name] = j
        if binary:
            self._binaries.append(j)
        return j

    def add_row(self, name: str, coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
                sense: str, rhs: float) -> int:
        i = len(self._rhs)
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for j, v in items:
            if v != 0:
                self._rows.append(i)
                self._cols.append(j)
                self._vals.append(float(v))
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(name)
        return i

    @property
    def n_vars(self) -> int:
        return len(self._c)

    @property
    def n_rows(self) -> int:
        return len(self._rhs)

    def build(self) -> LinearProgram:
        m, n = len(self._rhs), len(self._c)
        A = sp.csr_matrix((self._vals, (self._rows, self._cols)), shape=(m, n))
        A.sum_duplicates()
        return LinearProgram(np.array(self._c), A, tuple(self._senses), np.array(self._rhs),
                             np.array(self._lb), np.array(self._ub), tuple(self._names),
                             tuple(self._row_names))

    def build_mixed(self) -> MixedProgram:
        return MixedProgram(self.build(), np.array(self._binaries, dtype=int))


def row_activity(p: LinearProgram, x: np.ndarray) -> np.ndarray:
    return p.A @ x


def active_counts(p: LinearProgram, x: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, int]:
    """Binding-row mask and number of variables sitting on a finite bound."""
    act = row_activity(p, x)
    scale = 1.0 + np.abs(p.b)
    binding = np.abs(act - p.b) <= tol * scale
    at_bound = (np.isfinite(p.lb) & (np.abs(x - p.lb) <= tol * (1 + np.abs(p.lb)))) | (
        np.isfinite(p.ub) & (np.abs(x - p.ub) <= tol * (1 + np.abs(p.ub)))
    )
    return binding, int(at_bound.sum())


def degeneracy_flags(p: LinearProgram, x: np.ndarray, duals: np.ndarray,
                     tol: float = 1e-9) -> tuple[bool, np.ndarray]:
    """(primal-degenerate vertex?, per-row zero-slack-zero-dual mask)."""
    binding, n_at_bound = active_counts(p, x, tol)
    degenerate = int(binding.sum()) + n_at_bound > p.n_vars
    zero_dual = np.abs(duals) <= tol * (1 + np.abs(p.c).max(initial=0.0))
    return degenerate, binding & zero_dual


def dual_objective(p: LinearProgram, duals: np.ndarray, reduced: np.ndarray,
                   tol: float = 1e-9) -> float:
    """b.y + sum of bound terms; -inf if a reduced cost points at an infinite bound."""
    val = float(p.b @ duals) + p.obj_offset
    zero = tol * (1 + np.abs(p.c).max(initial=0.0))
    pos = reduced > zero
    neg = reduced < -zero
    if np.any(pos & ~np.isfinite(p.lb)) or np.any(neg & ~np.isfinite(p.ub)):
        return -np.inf
    val += float(reduced[pos] @ p.lb[pos]) + float(reduced[neg] @ p.ub[neg])
    return val


@dataclass(frozen=True)
class OptimalityReport:
    primal_infeasibility: float
    dual_infeasibility: float
    complementarity: float
    primal_objective: float
    dual_objective: float

    @property
    def gap(self) -> float:
        return abs(self.primal_objective - self.dual_objective)

    def ok(self, feas_tol: float = 1e-8, gap_tol: float = 1e-7) -> bool:
        return (
            self.primal_infeasibility <= feas_tol
            and self.dual_infeasibility <= feas_tol
            and self.complementarity <= feas_tol
            and self.gap <= gap_tol * (1 + abs(self.primal_objective))
        )


def check_optimality(p: LinearProgram, sol: LpSolution) -> OptimalityReport:
    """Measure KKT residuals of an optimal LP solution.

    Sign convention: ``duals[i]`` is d(objective)/d(b_i), so a binding >= row
    has a nonnegative dual and a binding <= row a nonpositive one.
    """
    x, y = sol.x, sol.duals
    act = p.A @ x
    senses = np.array(p.senses)
    viol = np.zeros(p.n_rows)
    viol = np.where(senses == LE, np.maximum(act - p.b, 0), viol)
    viol = np.where(senses == GE, np.maximum(p.b - act, 0), viol)
    viol = np.where(senses == EQ, np.abs(act - p.b), viol)
    bviol = np.maximum(np.maximum(p.lb - x, 0), np.maximum(x - p.ub, 0))
    pinf = float(max(viol.max(initial=0.0), bviol.max(initial=0.0)))

    d = p.c - p.A.T @ y
    dinf_rows = np.where(senses == LE, np.maximum(y, 0), 0) + np.where(senses == GE, np.maximum(-y, 0), 0)
    # reduced costs must point into the bounds that hold them
    slack_lo = x - p.lb
    slack_hi = p.ub - x
    dinf_vars = np.where(d > 0, np.where(np.isfinite(p.lb), 0, d), 0) + \
        np.where(d < 0, np.where(np.isfinite(p.ub), 0, -d), 0)
    dinf = float(max(dinf_rows.max(initial=0.0), dinf_vars.max(initial=0.0)))

    comp_rows = np.abs(y * (act - p.b))
    comp_lo = np.where(d > 0, d * np.where(np.isfinite(slack_lo), slack_lo, 0), 0)
    comp_hi = np.where(d < 0, -d * np.where(np.isfinite(slack_hi), slack_hi, 0), 0)
    comp = float(max(comp_rows.max(initial=0.0), comp_lo.max(initial=0.0), comp_hi.max(initial=0.0)))

    primal = float(p.c @ x) + p.obj_offset
    return OptimalityReport(pinf, dinf, comp, primal, dual_objective(p, y, d))


def names_of(p: LinearProgram, idx: Sequence[int]) -> list[str]:
    return [p.var_names[j] for j in idx]
