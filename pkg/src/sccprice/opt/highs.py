"""Adapters onto SciPy's HiGHS bindings (dual simplex and branch-and-cut)."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.optimize as so
import scipy.sparse as sp

from .program import EQ, GE, LE, LinearProgram, LpSolution, MixedProgram, NodeBudgetError, \
    SolverError, degeneracy_flags

# HiGHS's default 1e-6 lets binaries sit at ~1e-7, which large SCC
# coefficients turn into real row violations once rounded
MIP_FEASIBILITY_TOL = 1e-9


def _split_rows(p: LinearProgram):
    senses = np.array(p.senses)
    le = np.flatnonzero(senses == LE)
    ge = np.flatnonzero(senses == GE)
    eq = np.flatnonzero(senses == EQ)
    ub_rows = np.concatenate([le, ge])
    A_ub = sp.vstack([p.A[le], -p.A[ge]]).tocsr() if ub_rows.size else None
    b_ub = np.concatenate([p.b[le], -p.b[ge]]) if ub_rows.size else None
    A_eq = p.A[eq] if eq.size else None
    b_eq = p.b[eq] if eq.size else None
    return le, ge, eq, A_ub, b_ub, A_eq, b_eq


def solve_highs(p: LinearProgram) -> LpSolution:
    le, ge, eq, A_ub, b_ub, A_eq, b_eq = _split_rows(p)
    bounds = np.column_stack([np.where(np.isfinite(p.lb), p.lb, -np.inf),
                              np.where(np.isfinite(p.ub), p.ub, np.inf)])
    res = so.linprog(p.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                     method="highs-ds")
    if res.status == 2:
        return LpSolution("infeasible", backend="highs", row_names=p.row_names)
    if res.status == 3:
        return LpSolution("unbounded", backend="highs", row_names=p.row_names)
    if res.status != 0:
        raise SolverError(f"HiGHS LP failed: {res.message}")
    y = np.zeros(p.n_rows)
    if A_ub is not None:
        marg = res.ineqlin.marginals
        y[le] = marg[: le.size]
        y[ge] = -marg[le.size:]
    if A_eq is not None:
        y[eq] = res.eqlin.marginals
    x = np.asarray(res.x, dtype=float)
    reduced = p.c - p.A.T @ y
    degenerate, deg_rows = degeneracy_flags(p, x, y)
    return LpSolution("optimal", x=x, objective=float(p.c @ x) + p.obj_offset, duals=y,
                      reduced_costs=reduced, iterations=int(getattr(res, "nit", 0)),
                      degenerate=degenerate, degenerate_rows=deg_rows, backend="highs",
                      row_names=p.row_names)


def solve_highs_milp(mp: MixedProgram, mip_rel_gap: float = 1e-9, max_nodes: int | None = None,
                     time_limit: float | None = None) -> tuple[str, np.ndarray | None, float, float, int]:
    """Returns (status, x, objective, dual bound, node count)."""
    p = mp.lp
    senses = np.array(p.senses)
    lo = np.where(senses == LE, -np.inf, p.b)
    hi = np.where(senses == GE, np.inf, p.b)
    integrality = np.zeros(p.n_vars)
    integrality[mp.binaries] = 1
    options: dict = {"mip_rel_gap": mip_rel_gap, "presolve": True,
                     "mip_feasibility_tolerance": MIP_FEASIBILITY_TOL}
    if max_nodes is not None:
        options["node_limit"] = int(max_nodes)
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    constraints = so.LinearConstraint(p.A, lo, hi) if p.n_rows else ()
    with warnings.catch_warnings():
        # scipy forwards options it does not list to HiGHS verbatim, with a warning
        warnings.simplefilter("ignore", RuntimeWarning)
        res = so.milp(p.c, integrality=integrality, bounds=so.Bounds(p.lb, p.ub),
                      constraints=constraints, options=options)
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    bound = float(getattr(res, "mip_dual_bound", np.nan) or np.nan)
    if res.status == 2:
        return "infeasible", None, np.nan, bound, nodes
    if res.status == 3:
        return "unbounded", None, np.nan, bound, nodes
    if res.status == 1:
        inc = None
        if res.x is not None:
            inc = LpSolution("feasible", x=np.asarray(res.x), objective=float(res.fun) + p.obj_offset,
                             backend="highs")
        raise NodeBudgetError(f"HiGHS MILP stopped early: {res.message}", inc,
                              bound + p.obj_offset, nodes)
    if res.status != 0:
        raise SolverError(f"HiGHS MILP failed: {res.message}")
    return "optimal", np.asarray(res.x, dtype=float), float(res.fun) + p.obj_offset, \
        bound + p.obj_offset, nodes
