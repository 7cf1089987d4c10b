import csv
import json

import numpy as np
import pytest

from conftest import make_case
from corpus import binding_toy, toy_coeffs, toy_uc_case
from oracles import uc_enumeration
from sccprice.fit import CoefficientSet
from sccprice.grid import z_row_weights
from sccprice.pricing import (
    PriceReport, allocate, payments_table, price, price_dispatchable, price_marginal_unit,
    price_restricted, write_payments_table,
)
from sccprice.uc import InvariantError, UcConfig, UcInfeasibleError, solve_uc


def test_dispatchable_binding_price_matches_finite_difference():
    case, k = binding_toy()
    rep = price_dispatchable(case, k, sink=1)
    assert np.all(rep.sink_price >= 0)
    assert rep.sink_price.max() > 0
    for t, fd in rep.fd_prices.items():
        if t not in rep.degenerate_hours:
            assert fd == pytest.approx(rep.sink_price[t], rel=0.05)
    rep.check_invariants()


def test_dispatchable_slack_hours_price_zero():
    case, k = binding_toy()
    low = CoefficientSet(1, k.k_g, k.k_c, k.k_m, 0.0, 0.1)
    rep = price_dispatchable(case, low, sink=1)
    assert np.all(rep.sink_price == 0) and np.all(rep.payments == 0)
    sol = rep.solution
    for row in sol.scc_rows:
        if sol.row_slack(row) > 1e-8:
            assert rep.sink_price[int(row[4:-1])] == 0


def test_allocation_sums_and_offline_zero():
    case, _ = binding_toy()
    alloc, pay = allocate(case, 1, 7.5, np.array([1.0, 0.0]), np.array([0.4]))
    assert alloc.sum() == 7.5
    assert alloc[1] == 0 and pay[1] == 0
    assert np.all(pay >= 0)
    c = z_row_weights(case, [1.0, 0.0], 1, [0.4])
    w = np.abs(c.all_terms)
    np.testing.assert_allclose(alloc, 7.5 * w / w.sum(), rtol=1e-12)
    expected = alloc[0] * abs(c.z_sg[0]) / abs(c.z_ff) * case.gens[0].fault_current
    assert pay[0] == pytest.approx(expected)


def test_single_source_takes_whole_price():
    case, _ = binding_toy()
    alloc, pay = allocate(case, 1, 3.0, np.array([0.0, 1.0]), np.array([0.0]))
    assert list(alloc) == [0.0, 3.0, 0.0]
    assert pay[1] > 0 and pay[0] == 0 and pay[2] == 0


def test_zero_price_zero_allocation():
    case, _ = binding_toy()
    alloc, pay = allocate(case, 1, 0.0, np.array([1.0, 1.0]), np.array([1.0]))
    assert not alloc.any() and not pay.any()


def test_fractional_commitment_scales_weight():
    case, _ = binding_toy()
    full, _ = allocate(case, 1, 1.0, np.array([1.0, 1.0]), np.array([0.0]))
    half, _ = allocate(case, 1, 1.0, np.array([0.5, 1.0]), np.array([0.0]))
    assert half[0] < full[0]


def test_restricted_scc_price_zero_and_objective_matches():
    case, k = binding_toy()
    rep = price_restricted(case, k, sink=1)
    milp = solve_uc(case, k, UcConfig(1))
    assert rep.base_objective == pytest.approx(milp.objective, rel=1e-7)
    sol = rep.solution
    for t, row in enumerate(sol.scc_rows):
        if sol.row_slack(row) > 1e-8:
            assert rep.sink_price[t] == 0
    assert rep.lambda_commit.shape == (2, 2)
    rep.check_invariants()


def test_restricted_pin_forcing_shedding():
    # one unit at full output with demand above its capacity; turning it off
    # sheds its whole output
    case = make_case(1, [], [(0, 0.2, 0.0, 100.0, 10.0, 50.0, 100.0)], demand=[150.0],
                     shed_cost=1000.0)
    k = CoefficientSet(0, [5.0], [], [], 0.0, 1.0)
    rep = price_restricted(case, k, sink=0)
    off = solve_uc(case, k, UcConfig(0, variant="restricted", fixed_commitment=np.zeros((1, 1)),
                                     scc_slack=1e6))
    delta = off.objective - 1e6 * off.scc_shortfall.sum() - rep.base_objective
    assert -rep.lambda_commit[0, 0] == pytest.approx(delta, rel=0.05)


def test_restricted_volatility():
    r = PriceReport("restricted", 0, ["a", "b"], np.zeros(3), np.zeros((2, 3)), np.zeros((2, 3)),
                    np.ones((2, 3)), 0.0, lambda_commit=np.array([[1.0, 2.0, 0.0], [100.0, 1.0, 1.0]]))
    assert r.volatility == pytest.approx(100.0)


@pytest.mark.parametrize("seed", range(6))
def test_marginal_unit_matches_enumeration(seed):
    case = toy_uc_case(seed)
    k = toy_coeffs(case, seed)
    try:
        rep = price_marginal_unit(case, k, sink=2)
    except UcInfeasibleError:
        assert not np.isfinite(uc_enumeration(case, k))
        return
    base = uc_enumeration(case, k)
    assert rep.base_objective == pytest.approx(base, abs=1e-6)
    for e in range(case.n_gen + case.n_ibr):
        ref = uc_enumeration(case, k, removed=(e,))
        if np.isfinite(ref):
            assert rep.p_unit[e] == pytest.approx(ref - base, abs=1e-6)
        else:
            assert case.source_names()[e] in rep.infeasible_absorbed
    assert np.all(rep.p_unit >= -1e-6)
    rep.check_invariants()


def test_marginal_unit_zero_coefficient_source():
    case = toy_uc_case(3)
    k = toy_coeffs(case, 3)
    k = CoefficientSet(2, [k.k_g[0], 0.0, k.k_g[2]], k.k_c, [k.k_m[0], 0.0, 0.0], 0.0, 1.0)
    rep = price_marginal_unit(case, k, sink=2, jobs=2)
    assert rep.p_unit[1] == 0.0


def test_marginal_unit_keep_pairs_and_hourly():
    case = toy_uc_case(5)
    k = toy_coeffs(case, 5)
    try:
        a = price_marginal_unit(case, k, sink=2, hourly=True)
    except UcInfeasibleError:
        pytest.skip("instance infeasible with the SCC row")
    b = price_marginal_unit(case, k, sink=2, keep_pairs=True)
    # keeping the pair terms never tightens the program more than dropping them
    assert np.all(b.p_unit <= a.p_unit + 1e-6)
    assert a.p_unit_hourly.shape == (4, case.horizon)
    assert np.all(a.p_unit_hourly >= -1e-6)


def test_marginal_jobs_deterministic():
    case = toy_uc_case(1)
    k = toy_coeffs(case, 1, limit=3.0)
    a = price_marginal_unit(case, k, sink=2, jobs=1)
    b = price_marginal_unit(case, k, sink=2, jobs=4)
    assert np.array_equal(a.p_unit, b.p_unit)


def test_integral_relaxation_consistency():
    case, k = binding_toy()
    rep = price_dispatchable(case, k, sink=1)
    x = rep.solution.x
    if np.all(np.abs(x - np.round(x)) < 1e-9):
        assert rep.base_objective == pytest.approx(solve_uc(case, k, UcConfig(1)).objective, rel=1e-7)


def test_invariants_catch_bad_reports():
    base = dict(method="dispatchable", sink=0, source_names=["a"], base_objective=0.0)
    bad = PriceReport(sink_price=np.array([1.0]), source_price=np.array([[0.5]]),
                      payments=np.zeros((1, 1)), online=np.ones((1, 1)), **base)
    with pytest.raises(InvariantError):
        bad.check_invariants()
    paid_offline = PriceReport(sink_price=np.array([1.0]), source_price=np.array([[1.0]]),
                               payments=np.ones((1, 1)), online=np.zeros((1, 1)), **base)
    with pytest.raises(InvariantError):
        paid_offline.check_invariants()
    fd = PriceReport(sink_price=np.array([1.0]), source_price=np.array([[1.0]]), payments=np.zeros((1, 1)),
                     online=np.ones((1, 1)), fd_prices={0: 2.0}, **base)
    with pytest.raises(InvariantError):
        fd.check_invariants()
    fd.degenerate_hours = [0]
    fd.check_invariants()


def test_payments_table_and_files(tmp_path):
    case, k = binding_toy()
    reps = [price("dispatchable", case, k, 1)]
    sinks, names, mat = payments_table(reps)
    assert sinks == [1] and names == case.source_names() and mat.shape == (1, 3)
    assert np.all(mat[0] == reps[0].daily_payments)
    write_payments_table(reps, tmp_path / "pay.csv")
    rows = list(csv.reader(open(tmp_path / "pay.csv")))
    assert rows[0] == ["sink"] + names
    reps[0].to_csv(tmp_path / "p.csv")
    reps[0].to_json(tmp_path / "p.json")
    doc = json.loads((tmp_path / "p.json").read_text())
    assert doc["daily_average_price"] == pytest.approx(reps[0].daily_average_price, abs=1e-9)
    hourly = list(csv.DictReader(open(tmp_path / "p.csv")))
    assert [float(r["sink_price"]) for r in hourly] == pytest.approx(list(reps[0].sink_price), abs=1e-9)
    zero = payments_table([])
    assert zero[2].shape == (0, 0)
    with pytest.raises(ValueError):
        price("nope", case, k, 1)


def test_marginal_unit_infeasible_removal_is_absorbed():
    # the only SCC source is removed: the re-solve pays for the whole shortfall
    case = make_case(1, [], [(0, 0.2, 0.0, 100.0, 10.0, 50.0, 100.0)], demand=[60.0], shed_cost=1000.0)
    k = CoefficientSet(0, [5.0], [], [], 0.0, 1.0)
    rep = price_marginal_unit(case, k, sink=0)
    assert rep.infeasible_absorbed == ["SG1"]
    assert rep.p_unit[0] == pytest.approx(case.shed_cost * case.base_mva * 1.0)
