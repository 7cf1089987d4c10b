"""Admittance/impedance assembly and exact short-circuit currents.

Fault-current injections are magnitude-only phasors at angle 0; all phase
structure comes from the complex Z entries and reported SCC values are
magnitudes (p.u.).
"""

from __future__ import annotations

import threading
import warnings
import weakref
from collections import OrderedDict
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .case import NetworkCase

COND_LIMIT = 1e12
RESIDUAL_LIMIT = 1e-8
DEFAULT_CACHE_SIZE = 4096


class GridError(RuntimeError):
    """Structural problem with the network (e.g. an island without a source)."""


class SingularMatrixError(GridError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


def line_admittance(case: NetworkCase) -> np.ndarray:
    """Y^0: nodal admittance of the series line model only."""
    n = case.n_bus
    y0 = np.zeros((n, n), dtype=complex)
    for ln in case.lines:
        y = 1.0 / ln.series_impedance
        i, j = ln.from_bus, ln.to_bus
        y0[i, i] += y
        y0[j, j] += y
        y0[i, j] -= y
        y0[j, i] -= y
    return y0


def build_admittance(case: NetworkCase, commitment: Sequence[float]) -> np.ndarray:
    """Y = Y^0 + Y^g for a commitment vector over gens.

    Each committed SG adds 1/(j x_d2) to its bus diagonal. Fractional
    commitments scale that increment linearly.
    """
    x = np.asarray(commitment, dtype=float)
    if x.shape != (case.n_gen,):
        raise ValueError(f"commitment length {x.shape} != number of gens {case.n_gen}")
    y = _state(case).y0.copy()
    for g, xg in zip(case.gens, x):
        if xg != 0:
            y[g.bus, g.bus] += xg / (1j * g.x_d2)
    return y


def invert(m: np.ndarray) -> np.ndarray:
    """Dense LU inverse with a condition check and a residual guarantee."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    n = m.shape[0]
    eye = np.eye(n, dtype=complex)
    try:
        with warnings.catch_warnings():
            # an exactly zero pivot is reported below as SingularMatrixError
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu = scipy.linalg.lu_factor(m, check_finite=False)
    except (ValueError, np.linalg.LinAlgError) as exc:  # pragma: no cover - scipy variants
        raise SingularMatrixError(str(exc), np.inf) from exc
    if np.any(np.diag(lu[0]) == 0):
        raise SingularMatrixError("matrix is singular", np.inf)
    z = scipy.linalg.lu_solve(lu, eye, check_finite=False)
    cond = np.linalg.norm(m, 1) * np.linalg.norm(z, 1)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMatrixError("matrix is ill-conditioned", float(cond))
    resid = np.max(np.abs(m @ z - eye))
    if resid > RESIDUAL_LIMIT:
        raise SingularMatrixError(f"inverse residual {resid:.2e} too large", float(cond))
    return z


class ZCache:
    """Bounded LRU of impedance matrices keyed by commitment bitmask."""

    def __init__(self, maxsize: int = DEFAULT_CACHE_SIZE):
        self.maxsize = maxsize
        self._data: OrderedDict[int, np.ndarray] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: int) -> np.ndarray | None:
        with self._lock:
            z = self._data.get(key)
            if z is None:
                self.misses += 1
                return None
            self._data.move_to_end(key)
            self.hits += 1
            return z

    def put(self, key: int, z: np.ndarray) -> None:
        z.setflags(write=False)
        with self._lock:
            self._data[key] = z
            self._data.move_to_end(key)
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)

    def clear(self) -> None:
        with self._lock:
            self._data.clear()

    def __len__(self) -> int:
        return len(self._data)


@dataclass
class _GridState:
    y0: np.ndarray
    cache: ZCache


_states: "weakref.WeakKeyDictionary[NetworkCase, _GridState]" = weakref.WeakKeyDictionary()
_states_lock = threading.Lock()


def _state(case: NetworkCase) -> _GridState:
    with _states_lock:
        st = _states.get(case)
        if st is None:
            y0 = line_admittance(case)
            y0.setflags(write=False)
            st = _GridState(y0, ZCache())
            _states[case] = st
        return st


def z_cache(case: NetworkCase) -> ZCache:
    return _state(case).cache


def _bitmask(x: np.ndarray) -> int | None:
    if not np.all((x == 0) | (x == 1)):
        return None
    return int(sum(1 << i for i, v in enumerate(x) if v))


def impedance(case: NetworkCase, commitment: Sequence[float], use_cache: bool = True) -> np.ndarray:
    """Z = Y^{-1} for the given commitment (cached for binary commitments)."""
    x = np.asarray(commitment, dtype=float)
    key = _bitmask(x) if use_cache else None
    cache = _state(case).cache
    if key is not None:
        z = cache.get(key)
        if z is not None:
            return z
    if not np.any(x):
        raise GridError("no synchronous generator committed: Y has no shunt path to ground")
    try:
        z = invert(build_admittance(case, x))
    except SingularMatrixError as exc:
        raise GridError(f"cannot invert Y for commitment {x.astype(int).tolist()}: {exc}") from exc
    if key is not None:
        cache.put(key, z)
    return z


@dataclass(frozen=True)
class Contributions:
    """Numerator terms of the superposition formula for one sink.

    ``sg[g] = Z[F, bus(g)] * I_g * x_g``; ``ibr[c] = Z[F, bus(c)] * I_c * alpha_c``.
    """

    sink: int
    sg: np.ndarray
    ibr: np.ndarray
    z_ff: complex
    z_sg: np.ndarray
    z_ibr: np.ndarray

    @property
    def phasor(self) -> complex:
        return complex(-(self.sg.sum() + self.ibr.sum()) / self.z_ff)

    @property
    def all_terms(self) -> np.ndarray:
        return np.concatenate([self.sg, self.ibr])


def _check(case: NetworkCase, x: np.ndarray, alpha: np.ndarray, sink: int) -> None:
    if x.shape != (case.n_gen,):
        raise ValueError(f"commitment length {x.shape} != number of gens {case.n_gen}")
    if alpha.shape != (case.n_ibr,):
        raise ValueError(f"alpha length {alpha.shape} != number of IBRs {case.n_ibr}")
    if np.any(alpha < 0) or np.any(alpha > 1):
        raise ValueError("alpha values must lie in [0, 1]")
    if not 0 <= sink < case.n_bus:
        raise ValueError(f"sink {sink} is not a bus")


def z_row_weights(
    case: NetworkCase,
    commitment: Sequence[float],
    sink: int,
    alpha: Sequence[float] | None = None,
    use_cache: bool = True,
) -> Contributions:
    """Per-source complex contributions to the fault current at ``sink``.

    With ``alpha=None`` every IBR is taken fully online (alpha = 1).
    Offline SGs get an exact zero term.
    """
    x = np.asarray(commitment, dtype=float)
    a = np.ones(case.n_ibr) if alpha is None else np.asarray(alpha, dtype=float)
    _check(case, x, a, sink)
    z = impedance(case, x, use_cache=use_cache)
    row = z[sink]
    z_sg = np.array([row[g.bus] for g in case.gens], dtype=complex)
    z_ibr = np.array([row[c.bus] for c in case.ibrs], dtype=complex)
    i_sg = np.array([g.fault_current for g in case.gens], dtype=float)
    i_ibr = np.array([c.fault_current for c in case.ibrs], dtype=float)
    sg = np.where(x != 0, z_sg * i_sg * x, 0)
    ibr = np.where(a != 0, z_ibr * i_ibr * a, 0)
    return Contributions(sink, sg, ibr, complex(row[sink]), z_sg, z_ibr)


def compute_scc(
    case: NetworkCase,
    commitment: Sequence[float],
    alpha: Sequence[float],
    sink: int,
    use_cache: bool = True,
) -> float:
    """Exact short-circuit current magnitude (p.u.) at ``sink``."""
    x = np.asarray(commitment, dtype=float)
    a = np.asarray(alpha, dtype=float)
    _check(case, x, a, sink)
    if not np.any(x) and not np.any(a):
        return 0.0
    contrib = z_row_weights(case, x, sink, a, use_cache=use_cache)
    return abs(contrib.phasor)


def scc_batch(
    case: NetworkCase,
    commitment: Sequence[int],
    alphas: np.ndarray,
    sinks: Sequence[int],
) -> np.ndarray:
    """SCC magnitudes for one commitment and many IBR vectors.

    ``alphas`` is (n_samples, n_ibr); returns (n_samples, len(sinks)).
    """
    x = np.asarray(commitment, dtype=float)
    alphas = np.atleast_2d(np.asarray(alphas, dtype=float))
    z = impedance(case, x)
    gbus = [g.bus for g in case.gens]
    cbus = [c.bus for c in case.ibrs]
    i_sg = np.array([g.fault_current for g in case.gens]) * x
    i_ibr = np.array([c.fault_current for c in case.ibrs])
    out = np.empty((alphas.shape[0], len(sinks)))
    for k, f in enumerate(sinks):
        row = z[f]
        base = row[gbus] @ i_sg if gbus else 0j
        per_ibr = row[cbus] * i_ibr if cbus else np.zeros(0, dtype=complex)
        out[:, k] = np.abs((base + alphas @ per_ibr) / row[f])
    return out
