import csv
import json
import time

import pytest

from sccprice.cli import (
    EXIT_BUDGET, EXIT_INFEASIBLE, EXIT_INVARIANT, EXIT_OK, EXIT_USAGE, OUT_ENV, main,
)
from sccprice.fit import load_coefficients


def run(*args):
    return main([str(a) for a in args])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def tree_bytes(root):
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            data = p.read_bytes()
            if p.name.startswith("manifest"):
                doc = json.loads(data)
                doc.pop("out")
                data = json.dumps(doc, sort_keys=True).encode()
            out[p.relative_to(root).as_posix()] = data
    return out


def test_fit_micro_fast_and_round_trips(tmp_path):
    t0 = time.perf_counter()
    assert run("fit", "--case", "micro3", "--out", tmp_path) == EXIT_OK
    assert time.perf_counter() - t0 < 1.0
    errors = read_csv(tmp_path / "errors.csv")
    assert [r["type1_count"] for r in errors] == ["0"]
    k = load_coefficients(tmp_path / "coeffs_2.json")
    assert k.sink == 2 and k.limit == 4.0
    aligned = read_csv(tmp_path / "aligned_2.csv")
    assert len(aligned) == 30
    assert [float(r["observed"]) for r in aligned] == sorted(float(r["observed"]) for r in aligned)
    manifest = json.loads((tmp_path / "manifest_fit.json").read_text())
    assert manifest["seed"] == 0 and manifest["command"] == "fit"
    assert set(manifest["outputs"]) >= {"errors.csv", "coeffs_2.json", "dataset.csv"}


def test_uc_and_price_pipeline(tmp_path):
    assert run("fit", "--case", "micro3", "--out", tmp_path) == EXIT_OK
    assert run("uc", "--case", "micro3", "--out", tmp_path, "--unconstrained", "--plot-data") == EXIT_OK
    scc = read_csv(tmp_path / "scc_2.csv")
    assert len(scc) == 4 and {"constrained", "unconstrained", "same_commitment"} <= set(scc[0])
    assert (tmp_path / "plot_uc.csv").exists()
    for method in ("dispatchable", "restricted", "marginal"):
        assert run("price", "--case", "micro3", "--out", tmp_path, "--method", method) == EXIT_OK
        summary = json.loads((tmp_path / f"summary_{method}.json").read_text())
        assert summary["method"] == method
        pay = read_csv(tmp_path / f"payments_{method}.csv")
        assert pay[0]["sink"] == "2"
    restricted = read_csv(tmp_path / "price_restricted_2.csv")
    assert all(float(r["sink_price"]) == 0 for r in restricted)


def test_non_binding_dispatchable_prices_zero(tmp_path):
    assert run("fit", "--case", "micro3", "--out", tmp_path) == EXIT_OK
    assert run("price", "--case", "micro3", "--out", tmp_path, "--limit", "0.5") == EXIT_OK
    rows = read_csv(tmp_path / "price_dispatchable_2.csv")
    assert all(float(r["sink_price"]) == 0 for r in rows)


def test_env_default_output(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "envout"))
    monkeypatch.chdir(tmp_path)
    # the parser reads the environment when it is built
    assert run("fit", "--case", "micro3") == EXIT_OK
    assert (tmp_path / "envout" / "errors.csv").exists()


def test_exit_codes(tmp_path):
    assert run("fit", "--case", "nosuch", "--out", tmp_path) == EXIT_USAGE
    assert run("bogus") == EXIT_USAGE
    assert run("uc", "--case", "micro3", "--out", tmp_path) == EXIT_USAGE  # no coefficients yet
    assert run("fit", "--case", "micro3", "--out", tmp_path) == EXIT_OK
    assert run("uc", "--case", "micro3", "--out", tmp_path, "--limit", "100") == EXIT_INFEASIBLE
    assert run("uc", "--case", "micro3", "--out", tmp_path, "--solver", "native",
               "--max-nodes", "1") == EXIT_BUDGET
    assert run("fit", "--case", "ieee39", "--sink", "15", "--nu-grid", "0", "--out",
               tmp_path / "b") == EXIT_INFEASIBLE
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("fit", "--case", bad, "--out", tmp_path) == EXIT_USAGE


def test_invariant_exit_code(tmp_path, monkeypatch):
    from sccprice import cli
    from sccprice.uc import InvariantError

    def boom(*a, **k):
        raise InvariantError("forced")

    monkeypatch.setitem(cli.COMMANDS, "fit", boom)
    assert run("fit", "--case", "micro3", "--out", tmp_path) == EXIT_INVARIANT


def test_report_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("report", "--case", "micro3", "--out", a, "--plot-data") == EXIT_OK
    assert run("report", "--case", "micro3", "--out", b, "--plot-data", "--jobs", "3") == EXIT_OK
    ta, tb = tree_bytes(a), tree_bytes(b)
    assert set(ta) == set(tb)
    # --jobs is recorded in the manifest; everything else must match byte for byte
    for name in ta:
        if not name.startswith("manifest"):
            assert ta[name] == tb[name], name


@pytest.mark.parametrize("cmd", ["fit", "uc", "price", "report"])
def test_help(cmd, capsys):
    assert run(cmd, "--help") == EXIT_OK
    assert "--case" in capsys.readouterr().out
