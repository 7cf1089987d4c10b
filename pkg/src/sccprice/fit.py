"""Scenario datasets, the classification-constrained SCC fit, and error metrics.

The linearized SCC at a sink F is

    I_L = sum_g k_g x_g + sum_c k_c alpha_c + sum_{g1<g2} k_m x_g1 x_g2

and its coefficients minimize the squared error over the margin band
(limit <= I_sc < limit + nu) while samples below the limit must stay below
it and samples above limit + nu must stay above it.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .case import NetworkCase
from .grid import scc_batch
from .qp import QpInfeasibleError, solve_qp

log = logging.getLogger(__name__)

EPS_STRICT = 1e-6  # p.u.; realizes the strict "< limit" for below-limit samples
EPS_GUARD = 1e-9  # p.u.; keeps above-limit samples from rounding just under the limit
DEFAULT_RIDGE = 1e-9
DEFAULT_ALPHA_GRID = tuple(round(0.1 * i, 1) for i in range(10))
DEFAULT_NU_GRID = tuple(round(0.1 * i, 1) for i in range(21))


class InfeasibleFitError(ValueError):
    def __init__(self, message: str, nu: float):
        super().__init__(message)
        self.nu = nu


class MarginSearchError(ValueError):
    def __init__(self, message: str, attempted: Sequence[float]):
        super().__init__(message)
        self.attempted = list(attempted)


@dataclass(frozen=True)
class ScenarioSample:
    commitment: tuple[int, ...]
    alpha: tuple[float, ...]
    scc: dict[int, float]


@dataclass
class ScenarioSet:
    """Column-oriented scenario data; indexing yields ScenarioSample."""

    commitments: np.ndarray  # (S, G) int8
    alphas: np.ndarray  # (S, C)
    scc: np.ndarray  # (S, K)
    sinks: tuple[int, ...]

    def __post_init__(self) -> None:
        self.commitments = np.asarray(self.commitments, dtype=np.int8)
        self.alphas = np.asarray(self.alphas, dtype=float).reshape(len(self.commitments), -1)
        self.scc = np.asarray(self.scc, dtype=float).reshape(len(self.commitments), -1)
        self.sinks = tuple(int(s) for s in self.sinks)
        if np.any(self.scc < 0):
            raise ValueError("negative SCC in dataset")
        if len(self.commitments) and np.any(self.commitments.sum(axis=1) == 0):
            raise ValueError("dataset contains the all-offline commitment")

    def __len__(self) -> int:
        return len(self.commitments)

    def __getitem__(self, i: int) -> ScenarioSample:
        return ScenarioSample(
            tuple(int(v) for v in self.commitments[i]),
            tuple(float(v) for v in self.alphas[i]),
            {f: float(self.scc[i, k]) for k, f in enumerate(self.sinks)},
        )

    def __iter__(self) -> Iterator[ScenarioSample]:
        return (self[i] for i in range(len(self)))

    def scc_at(self, sink: int) -> np.ndarray:
        return self.scc[:, self.sinks.index(sink)]

    @classmethod
    def from_samples(cls, samples: Sequence[ScenarioSample]) -> "ScenarioSet":
        sinks = tuple(sorted(samples[0].scc)) if samples else ()
        return cls(
            np.array([s.commitment for s in samples]),
            np.array([s.alpha for s in samples]),
            np.array([[s.scc[f] for f in sinks] for s in samples]),
            sinks,
        )


def _as_set(samples) -> ScenarioSet:
    return samples if isinstance(samples, ScenarioSet) else ScenarioSet.from_samples(list(samples))


def pair_index(n_gen: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(n_gen), 2))


def design_matrix(commitments: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """Feature columns [x_g..., alpha_c..., x_g1*x_g2 for g1<g2]."""
    x = np.asarray(commitments, dtype=float)
    a = np.asarray(alphas, dtype=float)
    if a.ndim < 2:
        a = a.reshape(len(x), -1) if len(x) else a.reshape(0, 0)
    pairs = pair_index(x.shape[1])
    prod = np.column_stack([x[:, i] * x[:, j] for i, j in pairs]) if pairs else np.zeros((len(x), 0))
    return np.hstack([x, a, prod])


def enumerate_scenarios(
    case: NetworkCase,
    alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID,
    sinks: Sequence[int] | None = None,
    per_ibr: bool = False,
    jobs: int = 1,
) -> ScenarioSet:
    """Every nonzero commitment pattern crossed with the IBR grid.

    Patterns run in increasing bitmask order (bit g = gen g). With
    ``per_ibr`` the grid is applied independently to each IBR; otherwise a
    single grid value is applied to all IBRs at once.
    """
    grid = [float(a) for a in alpha_grid]
    if not grid:
        raise ValueError("alpha grid is empty")
    if any(a < 0 or a > 1 for a in grid):
        raise ValueError("alpha grid values must lie in [0, 1]")
    sinks = tuple(case.sinks if sinks is None else sinks)
    G, C = case.n_gen, case.n_ibr
    if per_ibr:
        alpha_rows = np.array(list(itertools.product(grid, repeat=C)), dtype=float).reshape(-1, C)
    else:
        alpha_rows = np.repeat(np.array(grid)[:, None], C, axis=1)
    patterns = [np.array([(mask >> g) & 1 for g in range(G)], dtype=np.int8)
                for mask in range(1, 2 ** G)]

    def run(x: np.ndarray) -> np.ndarray:
        return scc_batch(case, x, alpha_rows, sinks)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            blocks = list(pool.map(run, patterns))
    else:
        blocks = [run(x) for x in patterns]
    n_a = len(alpha_rows)
    commitments = np.repeat(np.array(patterns).reshape(-1, G), n_a, axis=0)
    alphas = np.tile(alpha_rows, (len(patterns), 1))
    scc = np.vstack(blocks) if blocks else np.zeros((0, len(sinks)))
    return ScenarioSet(commitments, alphas, scc, sinks)


class Partition(NamedTuple):
    below: np.ndarray  # scc < limit
    band: np.ndarray  # limit <= scc < limit + nu
    above: np.ndarray  # limit + nu <= scc


def partition_values(scc: np.ndarray, limit: float, nu: float) -> Partition:
    if nu < 0:
        raise ValueError("margin nu must be nonnegative")
    scc = np.asarray(scc, dtype=float)
    below = scc < limit
    above = scc >= limit + nu
    band = ~below & ~above
    return Partition(np.flatnonzero(below), np.flatnonzero(band), np.flatnonzero(above))


def partition_omega(samples, sink: int, limit: float, nu: float) -> Partition:
    """Index sets of the three subsets for ``sink``."""
    return partition_values(_as_set(samples).scc_at(sink), limit, nu)


@dataclass
class CoefficientSet:
    sink: int
    k_g: np.ndarray
    k_c: np.ndarray
    k_m: np.ndarray
    nu: float
    limit: float
    pairs: list[tuple[int, int]] = field(default_factory=list)
    objective: float = np.nan

    def __post_init__(self) -> None:
        self.k_g = np.asarray(self.k_g, dtype=float)
        self.k_c = np.asarray(self.k_c, dtype=float)
        self.k_m = np.asarray(self.k_m, dtype=float)
        if not self.pairs:
            self.pairs = pair_index(len(self.k_g))
        self.pairs = [tuple(int(v) for v in p) for p in self.pairs]
        g = len(self.k_g)
        if len(self.k_m) != g * (g - 1) // 2 or len(self.pairs) != len(self.k_m):
            raise ValueError("k_m must have one entry per generator pair")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.k_g, self.k_c, self.k_m])

    def linearized(self, commitments, alphas) -> np.ndarray:
        x = np.atleast_2d(np.asarray(commitments, dtype=float))
        a = np.asarray(alphas, dtype=float)
        if a.ndim < 2:
            a = a.reshape(len(x), len(self.k_c))
        return design_matrix(x, a) @ self.vector

    def zeroed(self, gens: Sequence[int] = (), ibrs: Sequence[int] = (),
               drop_pairs: bool = True) -> "CoefficientSet":
        """Copy with the listed sources' contributions removed."""
        k_g, k_c, k_m = self.k_g.copy(), self.k_c.copy(), self.k_m.copy()
        k_g[list(gens)] = 0.0
        k_c[list(ibrs)] = 0.0
        if drop_pairs:
            for i, (g1, g2) in enumerate(self.pairs):
                if g1 in gens or g2 in gens:
                    k_m[i] = 0.0
        return CoefficientSet(self.sink, k_g, k_c, k_m, self.nu, self.limit, list(self.pairs),
                              self.objective)

    def to_dict(self) -> dict:
        return {
            "sink": self.sink, "limit": self.limit, "nu": self.nu,
            "k_g": self.k_g.tolist(), "k_c": self.k_c.tolist(), "k_m": self.k_m.tolist(),
            "pairs": [list(p) for p in self.pairs], "objective": self.objective,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CoefficientSet":
        return cls(int(doc["sink"]), doc["k_g"], doc["k_c"], doc["k_m"], float(doc["nu"]),
                   float(doc["limit"]), [tuple(p) for p in doc.get("pairs", [])],
                   float(doc.get("objective", np.nan)))


def fit_coefficients(samples, sink: int, limit: float, nu: float,
                     ridge: float = DEFAULT_RIDGE, eps: float = EPS_STRICT) -> CoefficientSet:
    """Least squares over the margin band subject to the two classification constraints.

    ``ridge`` adds ``ridge * |k|^2`` (scaled by the mean curvature) so the QP is
    strictly convex; directions the data never pins down stay at zero.
    Raises InfeasibleFitError when the margin is too small.
    """
    data = _as_set(samples)
    scc = data.scc_at(sink)
    part = partition_values(scc, limit, nu)
    phi = design_matrix(data.commitments, data.alphas)
    n = phi.shape[1]
    band = phi[part.band]
    H = band.T @ band
    rho = ridge * max(1.0, float(np.trace(H)) / n)
    G = H + rho * np.eye(n)
    a = -band.T @ scc[part.band]
    C = np.vstack([-phi[part.below], phi[part.above]])
    b = np.concatenate([np.full(part.below.size, -(limit - eps)),
                        np.full(part.above.size, limit + EPS_GUARD)])
    try:
        res = solve_qp(G, a, C, b)
    except QpInfeasibleError as exc:
        raise InfeasibleFitError(f"sink {sink}: classification constraints infeasible at nu={nu}", nu) from exc
    k = res.x
    G_n, C_n = data.commitments.shape[1], data.alphas.shape[1]
    resid = scc[part.band] - band @ k
    log.debug("sink %s nu=%s: %d active constraints, %d QP iterations", sink, nu,
              res.active.size, res.iterations)
    return CoefficientSet(sink, k[:G_n], k[G_n:G_n + C_n], k[G_n + C_n:], float(nu), float(limit),
                          pair_index(G_n), float(resid @ resid))


def fit_objective(samples, coeffs: CoefficientSet) -> float:
    """Band sum of squared errors for ``coeffs`` on its own partition."""
    data = _as_set(samples)
    scc = data.scc_at(coeffs.sink)
    part = partition_values(scc, coeffs.limit, coeffs.nu)
    r = scc[part.band] - coeffs.linearized(data.commitments[part.band], data.alphas[part.band])
    return float(r @ r)


def select_margin(samples, sink: int, limit: float,
                  nu_grid: Sequence[float] = DEFAULT_NU_GRID, **fit_kw) -> float:
    """Smallest grid margin for which the fit is feasible."""
    nu, _ = fit_with_margin(samples, sink, limit, nu_grid, **fit_kw)
    return nu


def fit_with_margin(samples, sink: int, limit: float,
                    nu_grid: Sequence[float] = DEFAULT_NU_GRID,
                    **fit_kw) -> tuple[float, CoefficientSet]:
    grid = [float(v) for v in nu_grid]
    if not grid or any(v < 0 for v in grid) or grid != sorted(grid):
        raise ValueError("nu grid must be nonempty, nonnegative and ascending")
    data = _as_set(samples)
    for nu in grid:
        try:
            return nu, fit_coefficients(data, sink, limit, nu, **fit_kw)
        except InfeasibleFitError:
            log.info("sink %s: infeasible at nu=%s", sink, nu)
    raise MarginSearchError(
        f"sink {sink}: no feasible margin up to nu={grid[-1]} (tried {grid})", grid)


@dataclass(frozen=True)
class ErrorStats:
    type1_count: int
    type2_count: int
    type1_err: float | None
    type2_err: float | None


def classify_errors_values(scc: np.ndarray, lin: np.ndarray, limit: float) -> ErrorStats:
    scc = np.asarray(scc, dtype=float)
    lin = np.asarray(lin, dtype=float)
    t1 = (lin >= limit) & (scc < limit)
    t2 = (lin < limit) & (scc >= limit)

    def mean_rel(mask):
        if not mask.any():
            return None
        return float(np.mean((lin[mask] - scc[mask]) / scc[mask]))

    return ErrorStats(int(t1.sum()), int(t2.sum()), mean_rel(t1), mean_rel(t2))


def classify_errors(samples, coeffs: CoefficientSet, limit: float | None = None) -> ErrorStats:
    """Type I (linearization accepts, exact SCC violates) and Type II counts and mean relative errors."""
    data = _as_set(samples)
    lim = coeffs.limit if limit is None else limit
    lin = coeffs.linearized(data.commitments, data.alphas)
    return classify_errors_values(data.scc_at(coeffs.sink), lin, lim)


def misclassified(samples, coeffs: CoefficientSet) -> np.ndarray:
    """Indices whose exact and linearized SCC fall on opposite sides of the limit."""
    data = _as_set(samples)
    lin = coeffs.linearized(data.commitments, data.alphas)
    scc = data.scc_at(coeffs.sink)
    return np.flatnonzero((lin >= coeffs.limit) != (scc >= coeffs.limit))


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------

def save_coefficients(coeffs: CoefficientSet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(coeffs.to_dict(), indent=1) + "\n")


def load_coefficients(path: str | Path) -> CoefficientSet:
    return CoefficientSet.from_dict(json.loads(Path(path).read_text()))


def save_dataset(data: ScenarioSet, path: str | Path) -> None:
    G, C = data.commitments.shape[1], data.alphas.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{g}" for g in range(G)] + [f"alpha{c}" for c in range(C)]
                   + [f"scc_{f}" for f in data.sinks])
        for i in range(len(data)):
            w.writerow([int(v) for v in data.commitments[i]]
                       + [repr(float(v)) for v in data.alphas[i]]
                       + [repr(float(v)) for v in data.scc[i]])


def load_dataset(path: str | Path) -> ScenarioSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    xi = [i for i, h in enumerate(header) if h.startswith("x")]
    ai = [i for i, h in enumerate(header) if h.startswith("alpha")]
    si = [i for i, h in enumerate(header) if h.startswith("scc_")]
    arr = np.array(body, dtype=float) if body else np.zeros((0, len(header)))
    return ScenarioSet(arr[:, xi].astype(np.int8), arr[:, ai], arr[:, si],
                       tuple(int(header[i][4:]) for i in si))
