"""CPLEX LP text dump, for cross-checking programs in external solvers."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .program import EQ, GE, LE, LinearProgram, MixedProgram

_BAD = re.compile(r"[^A-Za-z0-9_.]")


def _name(s: str) -> str:
    s = _BAD.sub("_", s)
    return s if s and not s[0].isdigit() and s[0] != "." else f"_{s}"


def _num(v: float) -> str:
    return repr(float(v))


def _terms(coefs: np.ndarray, idx: np.ndarray, names: list[str]) -> str:
    if idx.size == 0:
        return "0 " + names[0] if names else "0"
    parts = []
    for k, (j, v) in enumerate(zip(idx, coefs)):
        sign = "-" if v < 0 else "+"
        if k == 0:
            parts.append(f"{'- ' if v < 0 else ''}{_num(abs(v))} {names[j]}")
        else:
            parts.append(f"{sign} {_num(abs(v))} {names[j]}")
    return " ".join(parts)


def to_lp_text(program: LinearProgram | MixedProgram) -> str:
    mp = program if isinstance(program, MixedProgram) else None
    p = mp.lp if mp else program
    names = [_name(v) for v in p.var_names]
    lines = ["\\ generated by sccprice", "Minimize"]
    nz = np.flatnonzero(p.c)
    lines.append(f" obj: {_terms(p.c[nz], nz, names)}")
    lines.append("Subject To")
    op = {LE: "<=", GE: ">=", EQ: "="}
    A = p.A.tocsr()
    for i in range(p.n_rows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        lines.append(f" {_name(p.row_names[i])}: {_terms(A.data[lo:hi], A.indices[lo:hi], names)}"
                     f" {op[p.senses[i]]} {_num(p.b[i])}")
    lines.append("Bounds")
    for j in range(p.n_vars):
        lb, ub = p.lb[j], p.ub[j]
        if not np.isfinite(lb) and not np.isfinite(ub):
            lines.append(f" {names[j]} free")
        elif lb == ub:
            lines.append(f" {names[j]} = {_num(lb)}")
        else:
            lo_s = _num(lb) if np.isfinite(lb) else "-inf"
            hi_s = _num(ub) if np.isfinite(ub) else "+inf"
            lines.append(f" {lo_s} <= {names[j]} <= {hi_s}")
    if mp is not None and mp.binaries.size:
        lines.append("Binary")
        lines.extend(f" {names[j]}" for j in mp.binaries)
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp_file(program: LinearProgram | MixedProgram, path: str | Path) -> None:
    Path(path).write_text(to_lp_text(program))
