from __future__ import annotations

import re

from mindisp.bench import aggregate, ExperimentRecord
from mindisp.grid import OccupancyGrid
from mindisp.planner import PlanQuery, plan
from mindisp.plotting import plot_graph, plot_plan, plot_sweep


def _gids(path):
    return re.findall(r'id="([^"]+)"', path.read_text())


def _markers(path, gid):
    text = path.read_text()
    i = text.index(f'id="{gid}"')
    return text[i:text.index("</g>", i)].count("<use")


def test_graph_figure_has_one_element_per_edge(small_rs_graph, tmp_path):
    p = tmp_path / "g.svg"
    plot_graph(small_rs_graph, p, tiles=1)
    ids = _gids(p)
    assert sum(i.startswith("edge-") for i in ids) == small_rs_graph.n_edges
    assert "vertices" in ids and "tiled-vertices" in ids
    assert _markers(p, "vertices") == small_rs_graph.n_vertices
    assert _markers(p, "tiled-vertices") == 8 * small_rs_graph.n_vertices


def test_plan_figure_has_one_curve_per_trajectory(small_rs_graph, tmp_path):
    grid = OccupancyGrid.empty(40, 40, 0.1, (-1.0, -1.0))
    r = plan(small_rs_graph, grid, PlanQuery((0.1, 0.2, 0.0), (2.2, 0.3, 3.0)), record_states=True)
    p = tmp_path / "p.svg"
    plot_plan(grid, r, small_rs_graph.system, p)
    ids = _gids(p)
    assert sum(i.startswith("traj-") for i in ids) == len(r.stitched)
    assert "expanded" in ids and "occupancy" in ids
    assert _markers(p, "expanded") == r.expansions


def test_sweep_figure_is_reproducible(tmp_path):
    recs = [ExperimentRecord(f"map{k}", m, "success", 2.0 + k, 10 * (k + 1), 3, 0.1, 0.5) for m in ("a", "b") for k in range(2)]
    aggs = aggregate(recs)
    p1, p2 = tmp_path / "s1.svg", tmp_path / "s2.svg"
    plot_sweep(aggs, p1)
    plot_sweep(aggs, p2)
    assert p1.read_bytes() == p2.read_bytes()
    ids = _gids(p1)
    assert sum(i.startswith("checks-") for i in ids) == 2
    assert sum(i.startswith("costs-") for i in ids) == 2
