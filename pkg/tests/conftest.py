from __future__ import annotations

import numpy as np
import pytest

from sccprice.case import Bus, Ibr, Line, NetworkCase, SynchGen, load_bundled
from sccprice.fit import enumerate_scenarios, fit_coefficients

BUNDLED_NU = 1.0


def make_case(n_bus, lines, gens, ibrs=(), demand=None, limits=None, horizon=1,
              shed_cost=10_000.0):
    """Small case builder.

    ``lines`` is [(i, j, z)]; ``gens`` is [(bus, x_d2, pmin, pmax, mc, noload, startup)];
    ``ibrs`` is [(bus, capacity, fault_current, availability)].
    ``demand`` is a per-hour total placed on the last bus.
    """
    d = np.zeros((n_bus, horizon))
    if demand is not None:
        d[-1] = np.asarray(demand, dtype=float)
    return NetworkCase(
        buses=tuple(Bus(i) for i in range(n_bus)),
        lines=tuple(Line(i, j, complex(z)) for i, j, z in lines),
        gens=tuple(SynchGen(g, bus, xd, pmin, pmax, mc, nl, su)
                   for g, (bus, xd, pmin, pmax, mc, nl, su) in enumerate(gens)),
        ibrs=tuple(Ibr(c, bus, cap, ic, tuple(av)) for c, (bus, cap, ic, av) in enumerate(ibrs)),
        demand=d,
        scc_limits=dict(limits or {}),
        shed_cost=shed_cost,
        horizon=horizon,
    )


def random_network(rng, n_bus, n_gen, n_ibr):
    """Connected random network: a spanning tree plus a few chords."""
    lines = []
    for i in range(1, n_bus):
        j = int(rng.integers(0, i))
        lines.append((j, i, complex(rng.uniform(0.0, 0.05), rng.uniform(0.02, 0.3))))
    for _ in range(int(rng.integers(0, n_bus))):
        i, j = rng.choice(n_bus, 2, replace=False)
        lines.append((int(i), int(j), complex(rng.uniform(0.0, 0.05), rng.uniform(0.02, 0.3))))
    gens = [(int(rng.integers(0, n_bus)), float(rng.uniform(0.1, 0.4)), 0.0, 100.0, 10.0, 0.0, 0.0)
            for _ in range(n_gen)]
    ibrs = [(int(rng.integers(0, n_bus)), 50.0, float(rng.uniform(0.5, 1.5)), (1.0,))
            for _ in range(n_ibr)]
    return make_case(n_bus, lines, gens, ibrs)


@pytest.fixture(scope="session")
def bundled():
    return load_bundled("ieee39")


@pytest.fixture(scope="session")
def bundled_scenarios(bundled):
    return enumerate_scenarios(bundled)


@pytest.fixture(scope="session")
def bundled_coeffs(bundled, bundled_scenarios):
    return {f: fit_coefficients(bundled_scenarios, f, bundled.scc_limits[f], BUNDLED_NU)
            for f in bundled.sinks}


@pytest.fixture(scope="session")
def micro():
    return load_bundled("micro3")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if not LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(LINES):
        terminalreporter.write_line(LINES[n])
