"""Branch-and-bound over binary variables.

Depth-first plunge until the first incumbent, best-bound afterwards; the
most fractional binary is branched on. Ties break on the lowest node id /
variable index so the search order is reproducible.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .program import LinearProgram, LpSolution, MixedProgram, NodeBudgetError

INT_TOL = 1e-6


@dataclass(order=True)
class _Node:
    bound: float
    id: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    depth: int = field(compare=False, default=0)


def branch_and_bound(
    mp: MixedProgram,
    lp_solve: Callable[[LinearProgram], LpSolution],
    max_nodes: int = 100_000,
    abs_gap: float = 1e-9,
) -> tuple[LpSolution | None, int, float, str]:
    """Returns (incumbent, nodes solved, final bound, status)."""
    p = mp.lp
    bins = mp.binaries
    ids = itertools.count()
    stack = [_Node(-np.inf, next(ids), p.lb.copy(), p.ub.copy())]
    heap: list[_Node] = []
    incumbent: LpSolution | None = None
    best = np.inf
    nodes = 0

    while stack or heap:
        node = stack.pop() if stack else heapq.heappop(heap)
        if node.bound >= best - abs_gap:
            continue
        if nodes >= max_nodes:
            open_bounds = [n.bound for n in stack + heap] + [node.bound]
            raise NodeBudgetError(
                f"branch-and-bound node budget ({max_nodes}) exhausted", incumbent,
                float(min(open_bounds)), nodes)
        sol = lp_solve(p.with_bounds(node.lb, node.ub))
        nodes += 1
        if sol.status == "unbounded":
            return None, nodes, -np.inf, "unbounded"
        if not sol.optimal or sol.objective >= best - abs_gap:
            continue
        xb = sol.x[bins]
        frac = np.minimum(xb - np.floor(xb), np.ceil(xb) - xb)
        if frac.size == 0 or frac.max() <= INT_TOL:
            incumbent, best = sol, sol.objective
            for n in stack:
                heapq.heappush(heap, n)
            stack.clear()
            continue
        k = int(np.argmax(frac))
        j = int(bins[k])
        down_ub = node.ub.copy()
        down_ub[j] = np.floor(sol.x[j])
        up_lb = node.lb.copy()
        up_lb[j] = np.ceil(sol.x[j])
        down = _Node(sol.objective, next(ids), node.lb, down_ub, node.depth + 1)
        up = _Node(sol.objective, next(ids), up_lb, node.ub, node.depth + 1)
        if incumbent is None:
            # pop the rounding-preferred child first
            if sol.x[j] - np.floor(sol.x[j]) >= 0.5:
                stack.extend([down, up])
            else:
                stack.extend([up, down])
        else:
            heapq.heappush(heap, down)
            heapq.heappush(heap, up)

    if incumbent is None:
        return None, nodes, np.inf, "infeasible"
    return incumbent, nodes, best, "optimal"
