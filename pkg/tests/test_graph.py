from __future__ import annotations

import itertools
import json
import struct

import numpy as np
import pytest
from conftest import di_box, rs_box

from mindisp.dispersion import PartialResultError, TilingSpec, min_dispersion_vertices
from mindisp.graph import (
    FORMAT_VERSION,
    MAGIC,
    ChecksumError,
    FormatVersionError,
    MalformedGraphError,
    build_edges,
    from_bytes,
    load,
    save,
    to_bytes,
)
from mindisp.sampling import generate_dense
from mindisp.systems import DoubleIntegrator2D, ReedsShepp


def _small_graph(system, box, n_vertices, tile=2.0, dense=600):
    pts = generate_dense(box, dense)
    try:
        run = min_dispersion_vertices(1e-9, pts, system, TilingSpec((0, 1), (tile, tile), 1), n_vertices)
    except PartialResultError as exc:
        run = exc.run
    return build_edges(run, system)


def _brute_force_edges(graph):
    """Every (src, dst, offset) with 0 < J < 2d, J evaluated one pair at a time."""
    d = graph.dispersion
    out = set()
    for i, j in itertools.product(range(graph.n_vertices), repeat=2):
        for off in itertools.product((-1, 0, 1), repeat=2):
            if i == j and off == (0, 0):
                continue
            c = graph.system.cost(graph.vertices[i], graph.world_state(j, off))
            if 0.0 < c < 2.0 * d:
                out.add((i, j, off))
    return out


def _edge_set(graph):
    return {
        (int(s), int(t), tuple(int(o) for o in off))
        for s, t, off in zip(graph.edge_src, graph.edge_dst, graph.edge_offset)
    }


@pytest.mark.parametrize("kind", ["reeds_shepp", "double_integrator"])
def test_edge_rule_matches_brute_force(kind):
    if kind == "reeds_shepp":
        g = _small_graph(ReedsShepp(0.5), rs_box(2.0), 12)
    else:
        g = _small_graph(DoubleIntegrator2D(1.0, 1.0, 0.5), di_box(2.0), 8)
    assert g.n_vertices <= 15
    assert _edge_set(g) == _brute_force_edges(g)
    assert len(_edge_set(g)) == g.n_edges


def test_edge_trajectories_join_their_endpoints(rs_graph):
    g = rs_graph
    for e in range(g.n_edges):
        t = g.trajectories[e]
        np.testing.assert_array_equal(t.start, g.vertices[g.edge_src[e]])
        np.testing.assert_allclose(t.end, g.world_state(int(g.edge_dst[e]), g.edge_offset[e]), atol=1e-12)
        assert t.cost == g.edge_cost[e]
        assert 0.0 < t.cost < 2.0 * g.dispersion


def test_out_edges_and_expand(rs_graph):
    g = rs_graph
    assert sum(g.out_degree(i) for i in range(g.n_vertices)) == g.n_edges
    succ = g.expand((0, (3, -2)))
    assert len(succ) == g.out_degree(0)
    for (v, tile), cost, traj in succ:
        np.testing.assert_allclose(traj.end, g.world_state(v, tile), atol=1e-12)
        np.testing.assert_allclose(traj.start, g.world_state(0, (3, -2)))
    with pytest.raises(IndexError):
        g.expand((g.n_vertices, (0, 0)))


def test_tile_of_and_world_state(rs_graph):
    g = rs_graph
    assert g.tile_of((0.5, 0.5, 0.0)) == (0, 0)
    assert g.tile_of((-0.1, 4.2, 0.0)) == (-1, 2)
    s = g.world_state(1, (2, -1))
    np.testing.assert_allclose(s[:2], g.vertices[1][:2] + np.array([4.0, -2.0]))


@pytest.mark.parametrize("which", ["rs", "di"])
def test_round_trip_is_exact(which, rs_graph, di_graphs, tmp_path):
    g = rs_graph if which == "rs" else di_graphs[0]
    buf = to_bytes(g)
    h = from_bytes(buf)
    assert to_bytes(h) == buf
    np.testing.assert_array_equal(h.vertices, g.vertices)
    np.testing.assert_array_equal(h.edge_cost, g.edge_cost)
    np.testing.assert_array_equal(h.edge_offset, g.edge_offset)
    assert h.history == g.history and h.dispersion == g.dispersion
    assert h.system.params() == g.system.params()
    for a, b in zip(g.trajectories, h.trajectories):
        np.testing.assert_array_equal(a.start, b.start)
        np.testing.assert_array_equal(a.end, b.end)
        if which == "rs":
            assert (a.letters, a.lengths) == (b.letters, b.lengths)
        else:
            np.testing.assert_array_equal(a.coeffs, b.coeffs)
    path = tmp_path / "g.mpg"
    save(g, path, extra={"seed": 7})
    assert path.read_bytes() == buf
    meta = json.loads(path.with_suffix(".json").read_text())
    assert meta["format_version"] == FORMAT_VERSION
    assert meta["vertices"] == g.n_vertices and meta["seed"] == 7
    assert meta["crc32"] == struct.unpack("<I", buf[-4:])[0]
    assert to_bytes(load(path)) == buf


def test_corruption_is_detected(rs_graph):
    buf = bytearray(to_bytes(rs_graph))
    flipped = bytearray(buf)
    flipped[len(buf) // 2] ^= 0x01
    with pytest.raises(ChecksumError):
        from_bytes(bytes(flipped))
    with pytest.raises(MalformedGraphError):
        from_bytes(bytes(buf[:-40]))
    with pytest.raises(MalformedGraphError):
        from_bytes(b"NOTAGRPH" + bytes(buf[8:]))
    newer = bytearray(buf)
    newer[len(MAGIC):len(MAGIC) + 4] = struct.pack("<I", FORMAT_VERSION + 1)
    with pytest.raises(FormatVersionError, match=str(FORMAT_VERSION + 1)):
        from_bytes(bytes(newer))


def test_edges_must_be_grouped_by_source(rs_graph):
    from dataclasses import replace

    with pytest.raises(ValueError):
        replace(rs_graph, edge_src=rs_graph.edge_src[::-1].copy(), _sample_cache={})


def test_single_vertex_graph_has_self_edges_to_neighbour_tiles():
    rs = ReedsShepp(0.5)
    run = min_dispersion_vertices(np.inf, generate_dense(rs_box(2.0), 500), rs, TilingSpec((0, 1), (2.0, 2.0), 1))
    g = build_edges(run, rs)
    assert g.n_vertices == 1
    assert all(int(s) == 0 and int(t) == 0 for s, t in zip(g.edge_src, g.edge_dst))
    assert not any(np.all(g.edge_offset == 0, axis=1))


def test_untiled_graph_edges_round_trip_and_plan():
    from mindisp.dispersion import NO_TILING
    from mindisp.grid import OccupancyGrid
    from mindisp.planner import PlanQuery, plan

    rs = ReedsShepp(0.5)
    run = min_dispersion_vertices(1.4, generate_dense(rs_box(2.5), 1500), rs, NO_TILING)
    g = build_edges(run, rs)
    assert g.n_vertices <= 15 and g.edge_offset.shape == (g.n_edges, 0)
    brute = {
        (i, j)
        for i, j in itertools.product(range(g.n_vertices), repeat=2)
        if i != j and 0.0 < rs.cost(g.vertices[i], g.vertices[j]) < 2.0 * g.dispersion
    }
    pairs = {(int(s), int(t)) for s, t in zip(g.edge_src, g.edge_dst)}
    assert pairs == brute
    # symmetric system without tiling: every edge has its reverse
    assert pairs == {(j, i) for i, j in pairs}
    assert to_bytes(from_bytes(to_bytes(g))) == to_bytes(g)
    occ = np.zeros((30, 30), bool)
    occ[5:25, 15] = True
    r = plan(g, OccupancyGrid(occ, 0.1), PlanQuery((0.2, 0.2, 0.0), (2.3, 2.3, 1.0)))
    assert r.success
    for a, b in zip(r.stitched[:-1], r.stitched[1:]):
        np.testing.assert_array_equal(a.end, b.start)
