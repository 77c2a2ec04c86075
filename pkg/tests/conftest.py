from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mindisp.dispersion import PartialResultError, TilingSpec, min_dispersion_vertices  # noqa: E402
from mindisp.graph import build_edges  # noqa: E402
from mindisp.sampling import StateBox, generate_dense  # noqa: E402
from mindisp.systems import DoubleIntegrator2D, ReedsShepp  # noqa: E402

RS_RADIUS = 0.5
RS_TILE = 2.0
RS_TARGET = 1.05

DI_PARAMS = dict(rho=1.0, u_max=1.0, v_max=0.5)
DI_TILE = 2.0
DI_DENSE = 4000
DI_SIZES = (5, 10, 20)


def rs_box(extent=RS_TILE):
    return StateBox((0.0, 0.0, -np.pi), (extent, extent, np.pi))


def di_box(extent=DI_TILE, v=0.5):
    return StateBox((0.0, 0.0, -v, -v), (extent, extent, v, v))


@pytest.fixture(scope="session")
def rs_system():
    return ReedsShepp(RS_RADIUS)


@pytest.fixture(scope="session")
def rs_run(rs_system):
    dense = generate_dense(rs_box(), 10_000, "sobol")
    return min_dispersion_vertices(RS_TARGET, dense, rs_system, TilingSpec((0, 1), (RS_TILE, RS_TILE), 1))


@pytest.fixture(scope="session")
def rs_graph(rs_run, rs_system):
    return build_edges(rs_run, rs_system)


@pytest.fixture(scope="session")
def di_system():
    return DoubleIntegrator2D(**DI_PARAMS)


@pytest.fixture(scope="session")
def di_run(di_system):
    dense = generate_dense(di_box(), DI_DENSE, "sobol")
    try:
        return min_dispersion_vertices(1e-9, dense, di_system, TilingSpec((0, 1), (DI_TILE, DI_TILE), 1), max(DI_SIZES))
    except PartialResultError as exc:
        return exc.run


@pytest.fixture(scope="session")
def di_graphs(di_run, di_system):
    return [build_edges(di_run.prefix(n), di_system) for n in DI_SIZES]


@pytest.fixture(scope="session")
def small_rs_graph():
    """A 4-vertex graph, cheap enough for exhaustive checks."""
    system = ReedsShepp(0.5)
    dense = generate_dense(rs_box(1.0), 2000, "sobol")
    try:
        run = min_dispersion_vertices(1e-9, dense, system, TilingSpec((0, 1), (1.0, 1.0), 1), 4)
    except PartialResultError as exc:
        run = exc.run
    return build_edges(run, system)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results.values():
            terminalreporter.write_line(line)
