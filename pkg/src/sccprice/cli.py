"""Command line entry point: ``sccprice fit|uc|price|report``.

Exit codes:
    0  success
    1  unexpected error
    2  bad arguments or unreadable input
    3  infeasible fit margin or infeasible UC
    4  solver budget (node or iteration limit) exhausted
    5  a reported invariant failed
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .case import CaseError, NetworkCase, bundled_case_path, load_case, with_limits
from .fit import (
    DEFAULT_ALPHA_GRID, DEFAULT_NU_GRID, CoefficientSet, InfeasibleFitError, MarginSearchError,
    classify_errors, enumerate_scenarios, fit_coefficients, fit_with_margin, load_coefficients,
    save_coefficients, save_dataset,
)
from .opt import IterationLimitError, NodeBudgetError, SolverOptions
from .pricing import METHODS, PriceReport, price, write_payments_table
from .uc import InvariantError, UcConfig, UcError, UcInfeasibleError, _fmt, solve_uc, write_rows

log = logging.getLogger("sccprice")

OUT_ENV = "SCCPRICE_OUT"
EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_BUDGET, EXIT_INVARIANT = 0, 1, 2, 3, 4, 5


class UsageError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _grid_text(grid: Sequence[float]) -> str:
    return ",".join(repr(float(v)) for v in grid)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", default="ieee39",
                        help="case JSON path or bundled name (ieee39, micro3)")
    common.add_argument("--out", default=os.environ.get(OUT_ENV, "sccprice_out"),
                        help=f"output directory (default ${OUT_ENV} or ./sccprice_out)")
    common.add_argument("--sink", type=int, action="append", dest="sinks",
                        help="sink bus id (0-based); repeatable; default all case sinks")
    common.add_argument("--jobs", type=int, default=1, help="worker threads")
    common.add_argument("--seed", type=int, default=0, help="recorded in the manifest")
    common.add_argument("--solver", choices=["auto", "native", "highs"], default="auto")
    common.add_argument("--max-nodes", type=int, default=100_000)
    common.add_argument("--plot-data", action="store_true", help="also write long-format CSV")
    common.add_argument("-v", "--verbose", action="store_true")

    fitting = argparse.ArgumentParser(add_help=False)
    fitting.add_argument("--alpha-grid", type=_floats, default=list(DEFAULT_ALPHA_GRID))
    fitting.add_argument("--nu-grid", type=_floats, default=list(DEFAULT_NU_GRID))
    fitting.add_argument("--nu", type=float, default=None,
                         help="fit at this margin instead of searching the grid")
    fitting.add_argument("--per-ibr", action="store_true", help="independent alpha per IBR")

    solving = argparse.ArgumentParser(add_help=False)
    solving.add_argument("--coeffs", action="append",
                         help="coefficient file or directory (default: the output directory)")
    solving.add_argument("--limit", type=float, default=None, help="override the sink's SCC limit")

    parser = argparse.ArgumentParser(prog="sccprice", description="SCC-constrained UC and SCC pricing")
    parser.add_argument("--version", action="version", version=f"sccprice {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fit", parents=[common, fitting], help="enumerate scenarios and fit coefficients")
    p_uc = sub.add_parser("uc", parents=[common, solving], help="solve the SCC-constrained UC")
    p_uc.add_argument("--unconstrained", action="store_true",
                      help="also solve without the SCC row and write both SCC series")
    p_price = sub.add_parser("price", parents=[common, solving], help="compute SCC prices")
    p_price.add_argument("--method", choices=METHODS, default="dispatchable")
    p_price.add_argument("--hourly", action="store_true", help="marginal-unit removal per hour too")
    p_price.add_argument("--keep-pairs", action="store_true",
                         help="marginal-unit: keep pair terms of the removed generator")
    sub.add_parser("report", parents=[common, fitting],
                   help="fit, solve and price every sink with every method")
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _load_case(spec: str) -> tuple[NetworkCase, str]:
    path = Path(spec)
    if not path.exists():
        bundled = bundled_case_path(spec)
        if not bundled.exists():
            raise UsageError(f"case {spec!r} is neither a file nor a bundled case")
        path = bundled
    return load_case(path), spec


def _options(args) -> SolverOptions:
    if args.solver == "native":
        return SolverOptions(lp="native", milp="bnb", max_nodes=args.max_nodes)
    if args.solver == "highs":
        return SolverOptions(lp="highs", milp="highs", max_nodes=args.max_nodes)
    return SolverOptions(max_nodes=args.max_nodes)


def _sinks(args, case: NetworkCase) -> list[int]:
    sinks = args.sinks or case.sinks
    for f in sinks:
        if f not in case.scc_limits and getattr(args, "limit", None) is None:
            raise UsageError(f"sink {f} has no SCC limit in the case")
        if not 0 <= f < case.n_bus:
            raise UsageError(f"sink {f} is not a bus")
    return list(sinks)


def _load_coeffs(args, sinks: Sequence[int]) -> dict[int, CoefficientSet]:
    paths: list[Path] = []
    for spec in args.coeffs or [args.out]:
        p = Path(spec)
        if p.is_dir():
            paths.extend(sorted(p.glob("coeffs_*.json")))
        elif p.exists():
            paths.append(p)
        else:
            raise UsageError(f"coefficient path {spec} does not exist")
    found = {}
    for p in paths:
        try:
            k = load_coefficients(p)
        except (KeyError, ValueError) as exc:
            raise UsageError(f"{p}: not a coefficient file ({exc})") from exc
        found[k.sink] = k
    missing = [f for f in sinks if f not in found]
    if missing:
        raise UsageError(f"no coefficients for sinks {missing}; run `sccprice fit` first")
    return found


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _config(args) -> dict:
    skip = {"command", "out", "verbose", "func"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        out[k] = _grid_text(v) if isinstance(v, list) and v and isinstance(v[0], float) else v
    return out


def _write_manifest(args, out: Path, case_spec: str, case_path: Path, written: list[Path],
                    coeff_paths: Sequence[Path] = ()) -> None:
    manifest = {
        "command": args.command,
        "case": case_spec,
        "case_sha256": _sha256(case_path),
        "coeffs": [str(p) for p in coeff_paths],
        "config": _config(args),
        "seed": args.seed,
        "out": str(args.out),
        "version": __version__,
        "outputs": {p.name: _sha256(p) for p in sorted(written)},
    }
    _json(out / f"manifest_{args.command}.json", manifest)


def _case_file(spec: str) -> Path:
    p = Path(spec)
    return p if p.exists() else bundled_case_path(spec)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def run_fit(args, case: NetworkCase, out: Path) -> list[Path]:
    sinks = _sinks(args, case)
    data = enumerate_scenarios(case, args.alpha_grid, sinks, per_ibr=args.per_ibr, jobs=args.jobs)
    log.info("enumerated %d scenarios", len(data))
    written = []
    p = out / "dataset.csv"
    save_dataset(data, p)
    written.append(p)
    error_rows, plot_rows = [], []
    for f in sinks:
        limit = case.scc_limits[f]
        if args.nu is not None:
            nu, k = args.nu, fit_coefficients(data, f, limit, args.nu)
        else:
            nu, k = fit_with_margin(data, f, limit, args.nu_grid)
        stats = classify_errors(data, k)
        if stats.type1_count:
            raise InvariantError(f"sink {f}: {stats.type1_count} Type-I errors after fitting")
        p = out / f"coeffs_{f}.json"
        save_coefficients(k, p)
        written.append(p)
        error_rows.append({
            "sink": f, "limit": _fmt(limit), "nu": _fmt(nu), "scenarios": len(data),
            "type1_count": stats.type1_count,
            "type1_err": "" if stats.type1_err is None else _fmt(stats.type1_err),
            "type2_count": stats.type2_count,
            "type2_err": "" if stats.type2_err is None else _fmt(stats.type2_err),
        })
        observed = data.scc_at(f)
        lin = k.linearized(data.commitments, data.alphas)
        order = np.argsort(observed, kind="stable")
        aligned = [{"rank": r, "scenario": int(i), "observed": _fmt(observed[i]),
                    "linearized": _fmt(lin[i])} for r, i in enumerate(order)]
        p = out / f"aligned_{f}.csv"
        write_rows(p, aligned)
        written.append(p)
        if args.plot_data:
            for row in aligned:
                plot_rows.append({"sink": f, "rank": row["rank"], "series": "observed", "value": row["observed"]})
                plot_rows.append({"sink": f, "rank": row["rank"], "series": "linearized", "value": row["linearized"]})
    p = out / "errors.csv"
    write_rows(p, error_rows)
    written.append(p)
    if args.plot_data:
        p = out / "plot_fit.csv"
        write_rows(p, plot_rows)
        written.append(p)
    return written


def _case_for(case: NetworkCase, f: int, limit: float | None) -> NetworkCase:
    return with_limits(case, {f: limit}) if limit is not None else case


def run_uc(args, case: NetworkCase, out: Path) -> list[Path]:
    sinks = _sinks(args, case)
    coeffs = _load_coeffs(args, sinks)
    opts = _options(args)
    written, plot_rows = [], []
    for f in sinks:
        c = _case_for(case, f, args.limit)
        limit = c.scc_limits[f]
        con = solve_uc(c, coeffs, UcConfig(f), opts)
        p = out / f"uc_{f}.csv"
        con.to_csv(p)
        written.append(p)
        exact_c = con.exact_scc()
        rows = [{"hour": t, "limit": _fmt(limit), "constrained": _fmt(exact_c[t])} for t in range(c.horizon)]
        if args.unconstrained:
            unc = solve_uc(c, coeffs, UcConfig(f, include_scc=False), opts)
            p = out / f"uc_{f}_unconstrained.csv"
            unc.to_csv(p, sinks=[f])
            written.append(p)
            exact_u = unc.exact_scc(f)
            for t, r in enumerate(rows):
                r["unconstrained"] = _fmt(exact_u[t])
                r["same_commitment"] = int(np.array_equal(unc.x[:, t], con.x[:, t]))
        p = out / f"scc_{f}.csv"
        write_rows(p, rows)
        written.append(p)
        summary = {"sink": f, "limit": limit, "objective": _fmt(con.objective),
                   "min_exact_over_limit": _fmt(exact_c.min() / limit),
                   "backend": con.lp.backend}
        if args.unconstrained:
            summary["objective_unconstrained"] = _fmt(unc.objective)
        p = out / f"uc_{f}.json"
        _json(p, summary)
        written.append(p)
        if args.plot_data:
            for r in rows:
                for key in ("constrained", "unconstrained", "limit"):
                    if key in r:
                        plot_rows.append({"sink": f, "hour": r["hour"], "series": key, "value": r[key]})
    if args.plot_data:
        p = out / "plot_uc.csv"
        write_rows(p, plot_rows)
        written.append(p)
    return written


def _price_one(args, case: NetworkCase, coeffs, f: int, method: str) -> PriceReport:
    c = _case_for(case, f, getattr(args, "limit", None))
    kw = {}
    if method == "marginal":
        kw = {"hourly": getattr(args, "hourly", False), "keep_pairs": getattr(args, "keep_pairs", False)}
    report = price(method, c, coeffs, f, options=_options(args), jobs=args.jobs, **kw)
    report.check_invariants()
    return report


def _write_reports(args, reports: list[PriceReport], method: str, out: Path) -> list[Path]:
    written = []
    for r in reports:
        p = out / f"price_{method}_{r.sink}.csv"
        r.to_csv(p)
        written.append(p)
        p = out / f"price_{method}_{r.sink}.json"
        r.to_json(p)
        written.append(p)
    p = out / f"payments_{method}.csv"
    write_payments_table(reports, p)
    written.append(p)
    summary = {
        "method": method,
        "daily_average_price": {str(r.sink): _fmt(r.daily_average_price) for r in reports},
        "payments": {str(r.sink): [_fmt(v) for v in r.daily_payments] for r in reports},
        "sources": reports[0].source_names if reports else [],
    }
    if method == "marginal":
        summary["p_unit"] = {str(r.sink): [_fmt(v) for v in r.p_unit] for r in reports}
    if method == "restricted":
        summary["volatility"] = {str(r.sink): _fmt(r.volatility) for r in reports}
    p = out / f"summary_{method}.json"
    _json(p, summary)
    written.append(p)
    if args.plot_data:
        rows = []
        for r in reports:
            for t in range(r.horizon):
                rows.append({"sink": r.sink, "hour": t, "source": "sink", "value": _fmt(r.sink_price[t])})
                for i, name in enumerate(r.source_names):
                    rows.append({"sink": r.sink, "hour": t, "source": name,
                                 "value": _fmt(r.source_price[i, t])})
        p = out / f"plot_price_{method}.csv"
        write_rows(p, rows)
        written.append(p)
    return written


def run_price(args, case: NetworkCase, out: Path) -> list[Path]:
    sinks = _sinks(args, case)
    coeffs = _load_coeffs(args, sinks)
    reports = [_price_one(args, case, coeffs, f, args.method) for f in sinks]
    return _write_reports(args, reports, args.method, out)


def run_report(args, case: NetworkCase, out: Path) -> list[Path]:
    written = run_fit(args, case, out)
    args.coeffs = [str(out)]
    args.limit = None
    args.unconstrained = True
    written += run_uc(args, case, out)
    sinks = _sinks(args, case)
    coeffs = _load_coeffs(args, sinks)
    for method in METHODS:
        reports = [_price_one(args, case, coeffs, f, method) for f in sinks]
        written += _write_reports(args, reports, method, out)
    return written


COMMANDS = {"fit": run_fit, "uc": run_uc, "price": run_price, "report": run_report}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        case, spec = _load_case(args.case)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        written = COMMANDS[args.command](args, case, out)
        coeff_paths = sorted(out.glob("coeffs_*.json")) if args.command != "fit" else []
        _write_manifest(args, out, spec, _case_file(args.case), written, coeff_paths)
        return EXIT_OK
    except (UsageError, CaseError, UcError, json.JSONDecodeError, OSError) as exc:
        print(f"sccprice: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleFitError, MarginSearchError, UcInfeasibleError) as exc:
        print(f"sccprice: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NodeBudgetError, IterationLimitError) as exc:
        print(f"sccprice: solver budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvariantError as exc:
        print(f"sccprice: invariant failed: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.exception("unexpected failure")
        print(f"sccprice: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
