"""Strictly convex QP with linear inequalities, dual active-set method.

Solves ``min 0.5 x'Gx + a'x  s.t.  C x >= b`` with G positive definite,
following Goldfarb & Idnani: start from the unconstrained minimum and add
the most violated constraint one at a time, dropping active constraints
whose multipliers would turn negative. The factorization ``J = L^{-T} Q``
and triangular ``R`` are updated with Givens rotations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class QpInfeasibleError(ValueError):
    """The constraint set is empty."""


@dataclass
class QpResult:
    x: np.ndarray
    objective: float
    active: np.ndarray
    multipliers: np.ndarray
    iterations: int


def _givens(a: float, b: float) -> tuple[float, float, float]:
    h = np.hypot(a, b)
    if h == 0.0:
        return 1.0, 0.0, 0.0
    return a / h, b / h, h


def solve_qp(G: np.ndarray, a: np.ndarray, C: np.ndarray, b: np.ndarray,
             tol: float = 1e-10, max_iter: int = 100_000) -> QpResult:
    G = np.asarray(G, dtype=float)
    a = np.asarray(a, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    b = np.asarray(b, dtype=float)
    n = G.shape[0]
    if C.size == 0:
        C = np.zeros((0, n))
    L = np.linalg.cholesky(G)
    J = scipy.linalg.solve_triangular(L, np.eye(n), lower=True).T  # L^{-T}
    x = -scipy.linalg.cho_solve((L, True), a)
    R = np.zeros((n, n))
    active: list[int] = []
    u = np.zeros(0)
    q = 0
    row_scale = 1.0 + np.abs(b)
    iterations = 0

    while True:
        s = C @ x - b
        if active:
            s[active] = np.inf
        viol = s / row_scale
        p = int(np.argmin(viol)) if viol.size else -1
        if p < 0 or viol[p] >= -tol:
            break
        npl = C[p]
        u_plus = np.append(u, 0.0)
        while True:
            iterations += 1
            if iterations > max_iter:
                raise RuntimeError("QP active-set iteration limit reached")
            d = J.T @ npl
            z = J[:, q:] @ d[q:]
            r = scipy.linalg.solve_triangular(R[:q, :q], d[:q]) if q else np.zeros(0)
            t1, k = np.inf, -1
            for j in range(q):
                if r[j] > 1e-14:
                    ratio = u_plus[j] / r[j]
                    if ratio < t1:
                        t1, k = ratio, j
            zn = float(z @ npl)
            sp_val = float(npl @ x - b[p])
            t2 = -sp_val / zn if np.linalg.norm(z) > 1e-12 and zn > 1e-14 else np.inf
            t = min(t1, t2)
            if not np.isfinite(t):
                raise QpInfeasibleError(f"constraints infeasible (conflict at row {p})")
            u_plus[:q] -= t * r
            u_plus[q] += t
            if np.isfinite(t2):
                x = x + t * z
            if t2 <= t1:
                # full step: constraint p becomes active
                for j in range(n - 1, q, -1):
                    c, s_, h = _givens(d[j - 1], d[j])
                    d[j - 1], d[j] = h, 0.0
                    Jj1 = J[:, j - 1].copy()
                    J[:, j - 1] = c * Jj1 + s_ * J[:, j]
                    J[:, j] = -s_ * Jj1 + c * J[:, j]
                R[: q + 1, q] = d[: q + 1]
                active.append(p)
                q += 1
                u = u_plus
                break
            # partial step: drop active constraint k and retry
            active.pop(k)
            u_plus = np.delete(u_plus, k)
            R[:, k:q - 1] = R[:, k + 1:q]
            R[:, q - 1] = 0.0
            q -= 1
            for j in range(k, q):
                c, s_, h = _givens(R[j, j], R[j + 1, j])
                rj = R[j, j:q].copy()
                rj1 = R[j + 1, j:q].copy()
                R[j, j:q] = c * rj + s_ * rj1
                R[j + 1, j:q] = -s_ * rj + c * rj1
                R[j + 1, j] = 0.0
                Jj = J[:, j].copy()
                J[:, j] = c * Jj + s_ * J[:, j + 1]
                J[:, j + 1] = -s_ * Jj + c * J[:, j + 1]

    obj = float(0.5 * x @ G @ x + a @ x)
    return QpResult(x, obj, np.array(active, dtype=int), u, iterations)
