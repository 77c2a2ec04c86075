from __future__ import annotations

import itertools

import numpy as np
import pytest
from conftest import di_box, rs_box
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import naive_greedy_dispersion

from mindisp.dispersion import (
    NO_TILING,
    DispersionConfigError,
    PartialResultError,
    TilingSpec,
    estimate_dispersion,
    min_dispersion_vertices,
    tile_points,
)
from mindisp.sampling import StateBox, generate_dense
from mindisp.systems import DoubleIntegrator2D, ReedsShepp


def _offsets(radius):
    return np.array(list(itertools.product(range(-radius, radius + 1), repeat=2)))


def test_incremental_matches_full_recompute_untiled():
    rs = ReedsShepp(0.5)
    dense = generate_dense(rs_box(2.0), 50, "sobol")
    try:
        run = min_dispersion_vertices(0.4, dense, rs, NO_TILING)
    except PartialResultError as exc:
        run = exc.run
    V, hist = naive_greedy_dispersion(dense.points, rs, rs.zero_state(), np.zeros((1, 2)), (0.0, 0.0), 0.4)
    np.testing.assert_array_equal(run.vertices, V)
    np.testing.assert_allclose(run.dispersion_history, hist, rtol=0, atol=1e-12)


def test_incremental_matches_full_recompute_tiled_double_integrator():
    di = DoubleIntegrator2D(1.0, 1.0, 0.5)
    dense = generate_dense(di_box(2.0), 120, "sobol")
    tiling = TilingSpec((0, 1), (2.0, 2.0), 1)
    try:
        run = min_dispersion_vertices(1e-9, dense, di, tiling, max_vertices=6)
    except PartialResultError as exc:
        run = exc.run
    V, hist = naive_greedy_dispersion(dense.points, di, di.zero_state(), _offsets(1), (2.0, 2.0), 1e-9, max_vertices=6)
    np.testing.assert_array_equal(run.vertices, V)
    np.testing.assert_allclose(run.dispersion_history, hist, rtol=0, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(20, 200), st.sampled_from(["sobol", "halton", "uniform_random"]), st.integers(0, 50))
def test_history_is_non_increasing(n, kind, seed):
    rs = ReedsShepp(0.5)
    dense = generate_dense(rs_box(2.0), n, kind, seed)
    try:
        run = min_dispersion_vertices(1e-9, dense, rs, TilingSpec((0, 1), (2.0, 2.0), 1), max_vertices=8)
    except PartialResultError as exc:
        run = exc.run
    h = np.asarray(run.dispersion_history)
    assert np.all(np.diff(h) <= 0.0)
    assert run.final_dispersion == h[-1]


def test_final_dispersion_is_a_covering_radius(rs_run, rs_system):
    est = estimate_dispersion(rs_run.vertices, rs_run.dense, rs_system, rs_run.tiling)
    assert est == rs_run.final_dispersion
    assert rs_run.final_dispersion <= rs_run.target
    assert rs_run.dispersion_history[-2] > rs_run.target


def test_vertices_come_from_the_dense_set(rs_run):
    pts = rs_run.dense.points
    for v, k in zip(rs_run.vertices[1:], rs_run.dense_index[1:]):
        np.testing.assert_array_equal(v, pts[k])
    np.testing.assert_array_equal(rs_run.vertices[0], 0.0)


def test_cap_raises_with_partial_run():
    rs = ReedsShepp(0.5)
    dense = generate_dense(rs_box(2.0), 500)
    with pytest.raises(PartialResultError) as info:
        min_dispersion_vertices(1e-6, dense, rs, NO_TILING, max_vertices=5)
    run = info.value.run
    assert len(run.vertices) == 5
    assert len(run.dispersion_history) == 5


def test_prefix_and_at_dispersion(di_run):
    p = di_run.prefix(5)
    assert len(p.vertices) == 5
    assert p.final_dispersion == di_run.dispersion_history[4]
    q = di_run.at_dispersion(di_run.dispersion_history[7])
    assert len(q.vertices) <= 8
    with pytest.raises(ValueError):
        di_run.prefix(0)
    with pytest.raises(ValueError):
        di_run.at_dispersion(1e-12)


def test_invalid_configurations():
    rs = ReedsShepp(0.5)
    dense = generate_dense(rs_box(2.0), 50)
    with pytest.raises(DispersionConfigError):
        min_dispersion_vertices(0.0, dense, rs, NO_TILING)
    shifted = generate_dense(StateBox((1.0, 1.0, -np.pi), (2.0, 2.0, np.pi)), 50)
    with pytest.raises(DispersionConfigError, match="zero state"):
        min_dispersion_vertices(1.0, shifted, rs, NO_TILING)
    with pytest.raises(DispersionConfigError):
        TilingSpec((0, 1), (2.0,), 1)
    with pytest.raises(DispersionConfigError):
        TilingSpec((0, 1), (2.0, -1.0), 1)


def test_tile_points_layout():
    V = np.array([[0.1, 0.2, 0.0], [1.0, 1.5, 1.0]])
    t = tile_points(V, TilingSpec((0, 1), (2.0, 3.0), 1))
    assert t.states.shape == (18, 3)
    for s, src, off in zip(t.states, t.source, t.offsets):
        np.testing.assert_allclose(s, V[src] + np.array([2.0 * off[0], 3.0 * off[1], 0.0]))
    untiled = tile_points(V, NO_TILING)
    np.testing.assert_array_equal(untiled.states, V)


def test_every_sample_is_reachable_both_ways_within_d(di_run, di_system):
    # non-symmetric soundness: some tiled vertex v has J(x, v) <= d and J(v, x) <= d
    run = di_run.prefix(10)
    d = run.final_dispersion
    tiled = tile_points(run.vertices, run.tiling).states
    X = run.dense.points
    ok = np.zeros(len(X), dtype=bool)
    for v in tiled:
        W = np.broadcast_to(v, X.shape)
        ok |= (di_system.costs(X, W) <= d) & (di_system.costs(W, X) <= d)
    assert ok.all()
