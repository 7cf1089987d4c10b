"""LP/MILP solving with dual extraction.

``solve_lp`` returns duals with the convention ``dual_i = d(objective)/d(b_i)``
for the minimized objective: positive on a binding >= row, negative on a
binding <= row, either sign on an equality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bnb import branch_and_bound
from .highs import solve_highs, solve_highs_milp
from .lpfile import to_lp_text, write_lp_file
from .program import (
    EQ, GE, LE, IterationLimitError, LinearProgram, LpSolution, MixedProgram, NodeBudgetError,
    OptimalityReport, ProgramBuilder, SolverError, check_optimality,
)
from .simplex import MAX_ITER, solve_dense

__all__ = [
    "EQ", "GE", "LE", "IterationLimitError", "LinearProgram", "LpSolution", "MixedProgram",
    "NodeBudgetError", "OptimalityReport", "ProgramBuilder", "SolverError", "SolverOptions",
    "check_optimality", "solve_lp", "solve_milp", "to_lp_text", "write_lp_file",
]

# above this many matrix entries "auto" hands LPs to HiGHS
AUTO_DENSE_LIMIT = 250_000
AUTO_BNB_BINARIES = 24


@dataclass(frozen=True)
class SolverOptions:
    """Backend selection.

    ``lp``: ``native`` (dense revised simplex), ``highs`` or ``auto``.
    ``milp``: ``bnb`` (our branch-and-bound), ``highs`` or ``auto``.
    ``auto`` keeps desk-scale toys on the native path and sends anything
    bigger to HiGHS.
    """

    lp: str = "auto"
    milp: str = "auto"
    max_nodes: int = 100_000
    mip_rel_gap: float = 1e-9
    max_iter: int = MAX_ITER

    def lp_backend(self, p: LinearProgram) -> str:
        if self.lp != "auto":
            return self.lp
        return "native" if p.n_rows * (p.n_vars + p.n_rows) <= AUTO_DENSE_LIMIT else "highs"

    def milp_method(self, mp: MixedProgram) -> str:
        if self.milp != "auto":
            return self.milp
        small = mp.binaries.size <= AUTO_BNB_BINARIES
        return "bnb" if small and self.lp_backend(mp.lp) == "native" else "highs"


DEFAULT_OPTIONS = SolverOptions()


def solve_lp(p: LinearProgram, backend: str = "native", max_iter: int = MAX_ITER) -> LpSolution:
    """Solve an LP to an optimal basis, or report infeasible/unbounded."""
    if backend == "native":
        return solve_dense(p, max_iter=max_iter)
    if backend == "highs":
        return solve_highs(p)
    if backend == "auto":
        return solve_lp(p, DEFAULT_OPTIONS.lp_backend(p), max_iter)
    raise ValueError(f"unknown LP backend {backend!r}")


def solve_milp(mp: MixedProgram, method: str = "bnb", lp_backend: str = "native",
               max_nodes: int = 100_000, mip_rel_gap: float = 1e-9) -> LpSolution:
    """Solve a mixed-binary program.

    The returned duals/reduced costs come from the LP with every binary fixed
    at its optimal value, which also snaps the binaries to exact integers.
    """
    p = mp.lp
    if method == "auto":
        opts = SolverOptions(lp=lp_backend, max_nodes=max_nodes, mip_rel_gap=mip_rel_gap)
        method = opts.milp_method(mp)
        lp_backend = opts.lp_backend(p)
    elif lp_backend == "auto":
        lp_backend = DEFAULT_OPTIONS.lp_backend(p)

    if method == "bnb":
        inc, nodes, bound, status = branch_and_bound(
            mp, lambda q: solve_lp(q, lp_backend), max_nodes=max_nodes)
        if inc is None:
            return LpSolution(status, nodes=nodes, bound=bound, backend="bnb", row_names=p.row_names)
        x = inc.x
    elif method == "highs":
        return _highs_milp(mp, lp_backend, max_nodes, mip_rel_gap)
    else:
        raise ValueError(f"unknown MILP method {method!r}")

    final = _fixed_binary_lp(mp, x, lp_backend)
    if not final.optimal:
        raise SolverError(f"fixed-binary LP is {final.status} after MILP solve")
    final.nodes = nodes
    final.bound = min(bound, final.objective) if np.isfinite(bound) else final.objective
    final.backend = f"{method}+{lp_backend}"
    return final


def _fixed_binary_lp(mp: MixedProgram, x: np.ndarray, lp_backend: str) -> LpSolution:
    p = mp.lp
    lb, ub = p.lb.copy(), p.ub.copy()
    fixed = np.clip(np.round(x[mp.binaries]), lb[mp.binaries], ub[mp.binaries])
    lb[mp.binaries] = fixed
    ub[mp.binaries] = fixed
    return solve_lp(p.with_bounds(lb, ub), lp_backend)


HIGHS_BRANCH_DEPTH = 4


def _highs_milp(mp: MixedProgram, lp_backend: str, max_nodes: int, mip_rel_gap: float,
                depth: int = 0) -> LpSolution:
    """HiGHS branch-and-cut, then the fixed-binary polish LP.

    HiGHS accepts binaries within its integrality tolerance of 0 or 1, so the
    rounded incumbent can be infeasible for the exact program. When the
    polish LP fails, the binary furthest from integral is fixed at 0 and at 1
    through its bounds (which HiGHS honors exactly) and both branches are
    solved; the cheaper polished branch wins.
    """
    p = mp.lp
    status, x, _, bound, nodes = solve_highs_milp(mp, mip_rel_gap=mip_rel_gap, max_nodes=max_nodes)
    if x is None:
        return LpSolution(status, nodes=nodes, bound=bound, backend="highs", row_names=p.row_names)
    final = _fixed_binary_lp(mp, x, lp_backend)
    if final.optimal:
        final.nodes = nodes
        final.bound = min(bound, final.objective) if np.isfinite(bound) else final.objective
        final.backend = f"highs+{lp_backend}"
        return final
    frac = np.abs(x[mp.binaries] - np.round(x[mp.binaries]))
    free = p.lb[mp.binaries] < p.ub[mp.binaries]
    if depth >= HIGHS_BRANCH_DEPTH or not np.any(free & (frac > 0)):
        raise SolverError(f"fixed-binary LP is {final.status} after HiGHS MILP solve")
    j = int(mp.binaries[np.argmax(np.where(free, frac, -1.0))])
    best = None
    for v in (0.0, 1.0):
        lb, ub = p.lb.copy(), p.ub.copy()
        lb[j] = ub[j] = v
        child = MixedProgram(p.with_bounds(lb, ub), mp.binaries)
        sol = _highs_milp(child, lp_backend, max_nodes, mip_rel_gap, depth + 1)
        nodes += sol.nodes or 0
        if sol.optimal and (best is None or sol.objective < best.objective):
            best = sol
    if best is None:
        return LpSolution("infeasible", nodes=nodes, bound=bound, backend="highs", row_names=p.row_names)
    best.nodes = nodes
    best.bound = min(bound, best.objective) if np.isfinite(bound) else best.objective
    return best


def solve_with(options: SolverOptions, program: LinearProgram | MixedProgram) -> LpSolution:
    if isinstance(program, MixedProgram):
        return solve_milp(program, method=options.milp_method(program),
                          lp_backend=options.lp_backend(program.lp),
                          max_nodes=options.max_nodes, mip_rel_gap=options.mip_rel_gap)
    return solve_lp(program, options.lp_backend(program), options.max_iter)
