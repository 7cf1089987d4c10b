"""Independent reference implementations used only by the tests.

None of these import solver or network code from the package; they are
deliberately naive so that agreement with the production code is evidence.
"""

from __future__ import annotations

import itertools

import numpy as np


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------

def sparse_admittance(n_bus, lines, gens, commitment):
    """Y assembled entry by entry from a dict-of-dicts, then densified.

    ``lines`` is [(i, j, z)], ``gens`` is [(bus, x_d2)].
    """
    entries: dict[tuple[int, int], complex] = {}
    for i, j, z in lines:
        y = 1.0 / complex(z)
        entries[(i, i)] = entries.get((i, i), 0) + y
        entries[(j, j)] = entries.get((j, j), 0) + y
        entries[(i, j)] = entries.get((i, j), 0) - y
        entries[(j, i)] = entries.get((j, i), 0) - y
    for (bus, xd), on in zip(gens, commitment):
        if on:
            entries[(bus, bus)] = entries.get((bus, bus), 0) + on / complex(0, xd)
    Y = [[0j] * n_bus for _ in range(n_bus)]
    for (i, j), v in entries.items():
        Y[i][j] += v
    return Y


def gauss_jordan_inverse(M):
    """Complex matrix inverse by Gauss-Jordan on Python lists."""
    n = len(M)
    A = [list(row) + [1.0 + 0j if i == j else 0j for j in range(n)] for i, row in enumerate(M)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(A[r][col]))
        A[col], A[piv] = A[piv], A[col]
        p = A[col][col]
        A[col] = [v / p for v in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * b for a, b in zip(A[r], A[col])]
    return [row[n:] for row in A]


def superposition_scc(n_bus, lines, gens, ibrs, commitment, alpha, sink):
    """|(-sum Z_F,g I_g x_g - sum Z_F,c I_c a_c) / Z_FF| in plain complex arithmetic.

    ``gens`` is [(bus, x_d2, I_g)], ``ibrs`` is [(bus, I_c)].
    """
    if not any(commitment) and not any(alpha):
        return 0.0
    Y = sparse_admittance(n_bus, lines, [(b, xd) for b, xd, _ in gens], commitment)
    Z = gauss_jordan_inverse(Y)
    num = 0j
    for (bus, _, i_g), x in zip(gens, commitment):
        num -= Z[sink][bus] * i_g * x
    for (bus, i_c), a in zip(ibrs, alpha):
        num -= Z[sink][bus] * i_c * a
    return abs(num / Z[sink][sink])


# ---------------------------------------------------------------------------
# LP: textbook two-phase tableau simplex on the standard form
# ---------------------------------------------------------------------------

def tableau_lp(c, A, senses, b, lb, ub, tol=1e-10):
    """min c.x s.t. rows, lb <= x <= ub (finite lb required).

    Converts to standard form (shift by lb, explicit upper-bound rows,
    slacks, artificials) and runs a dense Bland-rule tableau simplex.
    Returns (status, x, objective).
    """
    c = np.asarray(c, float)
    A = np.asarray(A, float).reshape(-1, len(c))
    b = np.asarray(b, float)
    lb = np.asarray(lb, float)
    ub = np.asarray(ub, float)
    n = len(c)
    rows, rhs, kinds = [], [], []
    shift = A @ lb
    for i in range(A.shape[0]):
        rows.append(A[i])
        rhs.append(b[i] - shift[i])
        kinds.append(senses[i])
    for j in range(n):
        if np.isfinite(ub[j]):
            e = np.zeros(n)
            e[j] = 1.0
            rows.append(e)
            rhs.append(ub[j] - lb[j])
            kinds.append("<=")
    m = len(rows)
    n_slack = sum(k != "=" for k in kinds)
    T = np.zeros((m, n + n_slack + m + 1))
    s = 0
    for i, (r, v, k) in enumerate(zip(rows, rhs, kinds)):
        T[i, :n] = r
        if k == "<=":
            T[i, n + s] = 1.0
            s += 1
        elif k == ">=":
            T[i, n + s] = -1.0
            s += 1
        T[i, -1] = v
        if v < 0:
            T[i] *= -1
        T[i, n + n_slack + i] = 1.0
    basis = [n + n_slack + i for i in range(m)]
    n_tot = n + n_slack + m

    def pivot(r, q):
        T[r] /= T[r, q]
        for i in range(m):
            if i != r and T[i, q] != 0:
                T[i] -= T[i, q] * T[r]
        basis[r] = q

    def run(cost, allowed):
        for _ in range(10000):
            cb = cost[basis]
            red = cost[:n_tot] - cb @ T[:, :n_tot]
            q = next((j for j in range(n_tot) if allowed[j] and red[j] < -tol), None)
            if q is None:
                return "optimal"
            ratios = [(T[i, -1] / T[i, q], basis[i], i) for i in range(m) if T[i, q] > tol]
            if not ratios:
                return "unbounded"
            _, _, r = min(ratios)
            pivot(r, q)
        raise RuntimeError("tableau oracle did not converge")

    phase1 = np.zeros(n_tot)
    phase1[n + n_slack:] = 1.0
    run(phase1, np.ones(n_tot, bool))
    if phase1[basis] @ T[:, -1] > 1e-7:
        return "infeasible", None, np.nan
    # drive remaining artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n + n_slack:
            q = next((j for j in range(n + n_slack) if abs(T[i, j]) > tol), None)
            if q is not None:
                pivot(i, q)
    allowed = np.ones(n_tot, bool)
    allowed[n + n_slack:] = False
    cost = np.zeros(n_tot)
    cost[:n] = c
    status = run(cost, allowed)
    if status != "optimal":
        return status, None, np.nan
    y = np.zeros(n_tot)
    for i, j in enumerate(basis):
        y[j] = T[i, -1]
    x = y[:n] + lb
    return "optimal", x, float(c @ x)


# ---------------------------------------------------------------------------
# MILP by enumeration
# ---------------------------------------------------------------------------

def enumerate_milp(c, A, senses, b, lb, ub, binaries):
    """Every 0/1 assignment of ``binaries``, inner LP by the tableau oracle."""
    best = (np.inf, None)
    binaries = list(binaries)
    for bits in itertools.product((0.0, 1.0), repeat=len(binaries)):
        lo, hi = np.array(lb, float), np.array(ub, float)
        ok = True
        for j, v in zip(binaries, bits):
            if v < lo[j] or v > hi[j]:
                ok = False
            lo[j] = hi[j] = v
        if not ok:
            continue
        status, x, obj = tableau_lp(c, A, senses, b, lo, hi)
        if status == "optimal" and obj < best[0] - 1e-12:
            best = (obj, x)
    return best


def knapsack_bruteforce(values, weights, capacity):
    best = 0.0
    for bits in itertools.product((0, 1), repeat=len(values)):
        if np.dot(bits, weights) <= capacity:
            best = max(best, float(np.dot(bits, values)))
    return best


# ---------------------------------------------------------------------------
# unit commitment by enumeration
# ---------------------------------------------------------------------------

def _merit_dispatch(gens_on, demand, ibr_cap, shed_cost):
    """Cheapest copper-plate dispatch for a fixed commitment of one hour.

    ``gens_on`` is [(pmin, pmax, mc)]; IBR output is free and curtailable.
    Returns energy cost or inf if minimum output cannot be absorbed.
    """
    pmin_total = sum(g[0] for g in gens_on)
    if pmin_total > demand + 1e-9:
        return np.inf
    rest = demand - pmin_total
    cost = sum(g[0] * g[2] for g in gens_on)
    use_ibr = min(rest, ibr_cap)
    rest -= use_ibr
    for pmin, pmax, mc in sorted(gens_on, key=lambda g: g[2]):
        if mc >= shed_cost:
            break
        take = min(rest, pmax - pmin)
        cost += take * mc
        rest -= take
    return cost + rest * shed_cost


def uc_enumeration(case, coeffs=None, limit=None, removed=(), drop_pairs=True):
    """Brute-force SCC-constrained UC on a tiny case with at most one IBR.

    Commitments are enumerated for all hours, the IBR online fraction is
    chosen in closed form per hour, and dispatch is merit order. ``removed`` lists source indices (SGs then IBRs)
    whose coefficients are zeroed.
    Returns the optimal objective.
    """
    G, C, T = case.n_gen, case.n_ibr, case.horizon
    demand = case.demand.sum(axis=0)
    avail = np.array([c.availability for c in case.ibrs]).reshape(C, T)
    caps = np.array([c.capacity for c in case.ibrs])
    pairs = list(itertools.combinations(range(G), 2))
    if coeffs is not None:
        kg = np.array(coeffs.k_g, float)
        kc = np.array(coeffs.k_c, float)
        km = np.array(coeffs.k_m, float)
        for e in removed:
            if e < G:
                kg[e] = 0
                if drop_pairs:
                    for m, (g1, g2) in enumerate(pairs):
                        if e in (g1, g2):
                            km[m] = 0
            else:
                kc[e - G] = 0
        lim = coeffs.limit if limit is None else limit

    def hour_cost(t, x):
        on = [(case.gens[g].p_min, case.gens[g].p_max, case.gens[g].cost_marginal)
              for g in range(G) if x[g]]
        noload = sum(case.gens[g].cost_noload for g in range(G) if x[g])
        pmin_total = sum(g[0] for g in on)
        if pmin_total > demand[t] + 1e-9:
            return np.inf
        # IBR energy is free, so the cheapest choice is the largest online
        # fraction that the SCC row, the availability and the minimum
        # output of committed units allow (single IBR only).
        lo, hi = 0.0, 1.0
        if C:
            hi = min(float(avail[0, t]), (demand[t] - pmin_total) / caps[0])
        if coeffs is not None:
            base = kg @ x + sum(km[m] * x[g1] * x[g2] for m, (g1, g2) in enumerate(pairs))
            k_ibr = kc[0] if C else 0.0
            if k_ibr > 0:
                lo = max(lo, (lim - base) / k_ibr)
            elif k_ibr < 0:
                hi = min(hi, (lim - base) / k_ibr)
            elif base < lim - 1e-9:
                return np.inf
        if lo > hi + 1e-12:
            return np.inf
        a = hi if C else 0.0
        return noload + _merit_dispatch(on, demand[t], float(caps[0] * a) if C else 0.0,
                                        case.shed_cost)

    best = np.inf
    patterns = list(itertools.product((0, 1), repeat=G))
    hour_tables = [{p: hour_cost(t, np.array(p)) for p in patterns} for t in range(T)]
    for plan in itertools.product(patterns, repeat=T):
        total = 0.0
        prev = (0,) * G
        for t, p in enumerate(plan):
            total += hour_tables[t][p]
            total += sum(case.gens[g].cost_startup for g in range(G) if p[g] and not prev[g])
            prev = p
            if total >= best:
                break
        best = min(best, total)
    return best


# ---------------------------------------------------------------------------
# convex QP by projected gradient (for tiny fits)
# ---------------------------------------------------------------------------

def qp_projected_dual(G, a, C, b, iters=200000, tol=1e-13):
    """min 0.5 x'Gx + a'x s.t. Cx >= b via projected gradient on the dual.

    Dual: max_{u>=0} -0.5 (C'u - a)' G^{-1} (C'u - a) + b'u.
    Returns the primal objective.
    """
    G = np.asarray(G, float)
    Gi = np.linalg.inv(G)
    C = np.atleast_2d(np.asarray(C, float))
    u = np.zeros(C.shape[0])
    Q = C @ Gi @ C.T
    step = 1.0 / max(np.linalg.eigvalsh(Q).max(), 1e-12)
    for _ in range(iters):
        x = Gi @ (C.T @ u - a)
        grad = b - C @ x
        u_new = np.maximum(u + step * grad, 0.0)
        if np.max(np.abs(u_new - u)) < tol:
            u = u_new
            break
        u = u_new
    x = Gi @ (C.T @ u - a)
    return float(0.5 * x @ G @ x + a @ x), x
