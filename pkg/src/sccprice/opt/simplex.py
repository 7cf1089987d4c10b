"""Dense bounded-variable revised simplex with exact dual extraction.

Every row gets a slack, ``a_i x + s_i = b_i``, whose bounds encode the sense
(<=: s >= 0, >=: s <= 0, =: s = 0). Infeasible starting rows receive a
phase-1 artificial. The basis inverse is kept explicitly and updated by
elementary row operations, with a fresh inverse every ``REFACTOR`` pivots.
Pricing is Dantzig's rule, switching to Bland's rule after ``BLAND_AFTER``
iterations to rule out cycling.
"""

from __future__ import annotations

import numpy as np

from .program import GE, LE, IterationLimitError, LinearProgram, LpSolution, degeneracy_flags

BLAND_AFTER = 5000
MAX_ITER = 50_000
REFACTOR = 100
FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9


class _Tableau:
    def __init__(self, A: np.ndarray, b: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                 basis: np.ndarray, x: np.ndarray):
        self.A = A
        self.b = b
        self.lower = lower
        self.upper = upper
        self.basis = basis
        self.x = x
        self.m = A.shape[0]
        self.is_basic = np.zeros(A.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.iterations = 0
        self.refactor()

    def refactor(self) -> None:
        B = self.A[:, self.basis]
        self.binv = np.linalg.inv(B) if self.m else np.zeros((0, 0))
        nonbasic = ~self.is_basic
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.binv @ rhs

    def duals(self, cost: np.ndarray) -> np.ndarray:
        return cost[self.basis] @ self.binv

    def run(self, cost: np.ndarray, max_iter: int) -> str:
        lower, upper, x = self.lower, self.upper, self.x
        fixed = lower == upper
        free = ~np.isfinite(lower) & ~np.isfinite(upper)
        lo_mag = np.where(np.isfinite(lower), np.abs(lower), 0.0)
        hi_mag = np.where(np.isfinite(upper), np.abs(upper), 0.0)
        since_refactor = 0
        while True:
            if self.iterations >= max_iter:
                raise IterationLimitError(
                    f"simplex hit the iteration limit ({max_iter})", self.iterations,
                    float(cost @ x))
            y = self.duals(cost)
            d = cost - y @ self.A
            at_lo = x <= lower + FEAS_TOL * (1 + lo_mag)
            at_hi = x >= upper - FEAS_TOL * (1 + hi_mag)
            can_up = ~self.is_basic & ~fixed & ~at_hi & (d < -OPT_TOL)
            can_down = ~self.is_basic & ~fixed & ~at_lo & (d > OPT_TOL)
            can_up |= ~self.is_basic & free & (d < -OPT_TOL)
            can_down |= ~self.is_basic & free & (d > OPT_TOL)
            eligible = np.flatnonzero(can_up | can_down)
            if eligible.size == 0:
                return "optimal"
            bland = self.iterations >= BLAND_AFTER
            if bland:
                j = int(eligible[0])
            else:
                j = int(eligible[np.argmax(np.abs(d[eligible]))])
            direction = 1.0 if d[j] < 0 else -1.0

            alpha = self.binv @ self.A[:, j]
            delta = -direction * alpha  # change of x_B per unit step
            xb = x[self.basis]
            lb_b = lower[self.basis]
            ub_b = upper[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_dec = np.where((delta < -PIVOT_TOL) & np.isfinite(lb_b), (xb - lb_b) / -delta, np.inf)
                t_inc = np.where((delta > PIVOT_TOL) & np.isfinite(ub_b), (ub_b - xb) / delta, np.inf)
            ratios = np.maximum(np.minimum(t_dec, t_inc), 0.0)
            t_flip = upper[j] - lower[j]
            t_best = ratios.min(initial=np.inf)
            if not np.isfinite(t_best) and not np.isfinite(t_flip):
                return "unbounded"
            if t_flip <= t_best:
                # entering variable hits its own opposite bound, basis unchanged
                x[self.basis] = xb + delta * t_flip
                x[j] = upper[j] if direction > 0 else lower[j]
                self.iterations += 1
                continue
            ties = np.flatnonzero(ratios <= t_best + 1e-12)
            if bland:
                p = int(ties[np.argmin(self.basis[ties])])
            else:
                p = int(ties[np.argmax(np.abs(alpha[ties]))])
            leaving = int(self.basis[p])
            x[self.basis] = xb + delta * t_best
            x[j] += direction * t_best
            x[leaving] = lower[leaving] if t_dec[p] <= t_inc[p] else upper[leaving]
            if not np.isfinite(x[leaving]):  # pragma: no cover - guarded by ratio test
                x[leaving] = 0.0
            self.basis[p] = j
            self.is_basic[j] = True
            self.is_basic[leaving] = False
            piv = alpha[p]
            row_p = self.binv[p] / piv
            self.binv -= np.outer(alpha, row_p)
            self.binv[p] = row_p
            self.iterations += 1
            since_refactor += 1
            if since_refactor >= REFACTOR:
                self.refactor()
                since_refactor = 0


def solve_dense(p: LinearProgram, max_iter: int = MAX_ITER) -> LpSolution:
    A = p.A.toarray()
    m, n = A.shape
    b = p.b.copy()
    lower = np.concatenate([p.lb, np.zeros(m)])
    upper = np.concatenate([p.ub, np.zeros(m)])
    senses = np.array(p.senses)
    upper[n:][senses == LE] = np.inf
    lower[n:][senses == GE] = -np.inf

    x = np.zeros(n + m)
    start = np.where(np.isfinite(p.lb), p.lb, np.where(np.isfinite(p.ub), p.ub, 0.0))
    x[:n] = start
    resid = b - A @ start
    slack_start = np.clip(resid, lower[n:], upper[n:])
    gap = resid - slack_start
    needs_art = np.abs(gap) > FEAS_TOL * (1 + np.abs(b))
    art_rows = np.flatnonzero(needs_art)
    k = art_rows.size

    cols = [A, np.eye(m)]
    if k:
        art = np.zeros((m, k))
        art[art_rows, np.arange(k)] = np.sign(gap[art_rows])
        cols.append(art)
    full = np.hstack(cols)
    lower = np.concatenate([lower, np.zeros(k)])
    upper = np.concatenate([upper, np.full(k, np.inf)])
    x = np.concatenate([x, np.zeros(k)])
    basis = np.arange(n, n + m)
    if k:
        x[n + art_rows] = slack_start[art_rows]
        basis[art_rows] = n + m + np.arange(k)
    tab = _Tableau(full, b, lower, upper, basis, x)

    if k:
        cost1 = np.zeros(n + m + k)
        cost1[n + m:] = 1.0
        tab.run(cost1, max_iter)
        infeas = float(tab.x[n + m:].sum())
        if infeas > 1e-7 * (1 + np.abs(b).max(initial=0.0)):
            return LpSolution("infeasible", iterations=tab.iterations, backend="native",
                              row_names=p.row_names)
        # pin artificials at zero; basic ones may linger degenerate
        tab.upper[n + m:] = 0.0
        tab.x[n + m:] = np.where(tab.is_basic[n + m:], tab.x[n + m:], 0.0)
        tab.refactor()

    cost = np.concatenate([p.c, np.zeros(m + k)])
    status = tab.run(cost, max_iter)
    if status == "unbounded":
        return LpSolution("unbounded", iterations=tab.iterations, backend="native",
                          row_names=p.row_names)
    tab.refactor()
    xs = tab.x[:n].copy()
    y = tab.duals(cost)
    reduced = p.c - A.T @ y
    degenerate, deg_rows = degeneracy_flags(p, xs, y)
    return LpSolution(
        "optimal", x=xs, objective=float(p.c @ xs) + p.obj_offset, duals=y,
        reduced_costs=reduced, iterations=tab.iterations, degenerate=degenerate,
        degenerate_rows=deg_rows, backend="native", row_names=p.row_names,
    )
