"""Acceptance criteria, one PASS/FAIL line each (printed again in the terminal summary)."""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np
import pytest
from conftest import DI_PARAMS, RS_RADIUS, RS_TARGET, RS_TILE, di_box, rs_box
from oracles import di_bilevel_grid, di_effort_transcription, naive_greedy_dispersion, rs_oracle_costs
from test_graph import _brute_force_edges, _edge_set, _small_graph
from test_planner import _free

import mindisp.planner as planner_mod
from mindisp import bench
from mindisp.cli import main
from mindisp.dispersion import NO_TILING, PartialResultError, TilingSpec, min_dispersion_vertices
from mindisp.graph import build_edges, from_bytes, load, to_bytes
from mindisp.planner import BUDGET_EXHAUSTED, PlanQuery, plan
from mindisp.sampling import generate_dense
from mindisp.systems import DoubleIntegrator2D, ReedsShepp, inner_effort

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
RESULTS: dict = {}


def report(key, ok, detail):
    line = f"criterion {key:<22} {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[key] = line
    print(line)
    return ok


def _rs_states(rng, n, span=3.0):
    return np.column_stack([rng.uniform(-span, span, (n, 2)), rng.uniform(-math.pi, math.pi, n)])


def _di_states(rng, n, v, span=3.0):
    return np.column_stack([rng.uniform(-span, span, (n, 2)), rng.uniform(-v, v, (n, 2))])


# ------------------------------------------------------------ 1


def test_1_completeness_on_certified_maps():
    t0 = time.perf_counter()
    rs = ReedsShepp(RS_RADIUS)
    run = min_dispersion_vertices(RS_TARGET, generate_dense(rs_box(), 10_000), rs, TilingSpec((0, 1), (RS_TILE,) * 2, 1))
    g = build_edges(run, rs)
    d = g.dispersion
    delta = 2 * d + d / 10  # one collision-resolution step is d / 10
    summary = bench.completeness_trial(g, delta, 50, seed=0)
    elapsed = time.perf_counter() - t0
    certified = all(o.certified for o in summary.outcomes)
    ok = summary.success_fraction == 1.0 and certified and elapsed < 300
    report("1 completeness", ok,
           f"d={d:.5f} delta={delta:.5f} success={summary.success_fraction:.2f} "
           f"certified={certified} time={elapsed:.0f}s")
    assert ok


# ------------------------------------------------------------ 2


def test_2_incremental_selection_equals_full_recompute():
    rs = ReedsShepp(RS_RADIUS)
    dense = generate_dense(rs_box(), 50, "sobol")
    try:
        run = min_dispersion_vertices(1e-9, dense, rs, NO_TILING, max_vertices=64)
    except PartialResultError as exc:
        run = exc.run
    V, hist = naive_greedy_dispersion(dense.points, rs, rs.zero_state(), np.zeros((1, 2)), (0.0, 0.0), 1e-9, 64)
    same_order = run.vertices.shape == V.shape and np.array_equal(run.vertices, V)
    gap = float(np.max(np.abs(np.asarray(run.dispersion_history) - hist))) if len(hist) == len(run.dispersion_history) else math.inf
    ok = same_order and gap <= 1e-12
    report("2 oracle equivalence", ok, f"vertices={len(V)} identical_order={same_order} max_history_gap={gap:.1e}")
    assert ok


# ------------------------------------------------------------ 3


def test_3a_reeds_shepp_matches_path_word_oracle():
    rng = np.random.default_rng(100)
    a, b = _rs_states(rng, 1000), _rs_states(rng, 1000)
    rs = ReedsShepp(RS_RADIUS)
    ours = rs.costs(a, b)
    ref = rs_oracle_costs(a, b, RS_RADIUS, starts_per_axis=3, iters=25)
    err = float(np.max(np.abs(ours - ref)))
    ok = bool(np.all(np.isfinite(ref))) and err <= 1e-9
    report("3a RS steering", ok, f"pairs=1000 max_abs_err={err:.1e}")
    assert ok


def test_3b_double_integrator_matches_duration_grid():
    rng = np.random.default_rng(101)
    v = DI_PARAMS["v_max"]
    a, b = _di_states(rng, 200, v), _di_states(rng, 200, v)
    di = DoubleIntegrator2D(**DI_PARAMS)
    ours = di.costs(a, b)
    ref = np.array([di_bilevel_grid(x, y, **DI_PARAMS)[0] for x, y in zip(a, b)])
    rel = float(np.max(np.abs(ours - ref) / ref))
    ok = rel <= 1e-6
    report("3b DI bi-level cost", ok, f"pairs=200 max_rel_err={rel:.1e}")
    assert ok


def test_3c_inner_effort_matches_transcription():
    rng = np.random.default_rng(102)
    a, b = _di_states(rng, 50, 0.5), _di_states(rng, 50, 0.5)
    T = rng.uniform(0.5, 6.0, 50)
    rel = 0.0
    for x, y, t in zip(a, b, T):
        eff, _ = inner_effort(x, y, t)
        ref = di_effort_transcription(x, y, t, steps=400)
        rel = max(rel, abs(eff - ref) / ref)
    ok = rel <= 1e-4
    report("3c DI inner effort", ok, f"pairs=50 max_rel_err={rel:.1e}")
    assert ok


# ------------------------------------------------------------ 4, 5, 7 (bench)


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    t0 = time.perf_counter()
    code = main(["bench", "--config", str(CONFIGS / "double_integrator_bench.toml"), "--out", str(out), "--jobs", "1"])
    elapsed = time.perf_counter() - t0
    assert code == 0
    records = bench.read_records(out / "records.csv")
    return out, records, bench.aggregate(records), elapsed


def _graph_rows(aggs):
    rows = [a for a in aggs if a["method_id"].startswith("dispersion_")]
    return sorted(rows, key=lambda a: -a["dispersion"])


def test_4_dispersion_trend(sweep):
    _, _, aggs, elapsed = sweep
    rows = _graph_rows(aggs)
    checks = [a["mean_collision_checks"] for a in rows]
    costs = [a["mean_cost"] for a in rows]
    ok = (
        len(rows) >= 3
        and all(a["maps"] == 20 and a["successes"] == 20 for a in rows)
        and all(x < y for x, y in zip(checks, checks[1:]))
        and all(y <= x for x, y in zip(costs, costs[1:]))
        and elapsed < 900
    )
    detail = " | ".join(f"d={a['dispersion']:.3f} checks={a['mean_collision_checks']:.0f} cost={a['mean_cost']:.2f}"
                        for a in rows)
    report("4 dispersion trend", ok, f"{detail} | bench time={elapsed:.0f}s")
    assert ok


def test_5_baseline_fragility(sweep):
    _, _, aggs, _ = sweep
    graphs = _graph_rows(aggs)
    base = [a for a in aggs if a["method_id"].startswith("uniform_")]
    exhausted = [a["method_id"] for a in base if a["budget_exhausted"]]
    graphs_ok = all(a["successes"] == a["maps"] for a in graphs)
    ok = len(base) == 9 and bool(exhausted) and graphs_ok
    report("5 baseline fragility", ok,
           f"exhausted {len(exhausted)}/9 configs ({', '.join(exhausted)}); graphs all succeed={graphs_ok}")
    assert ok


# ------------------------------------------------------------ 6


def test_6_tiling_economy(rs_graph, rs_system):
    dense = generate_dense(rs_box(3 * RS_TILE), 9 * 10_000)  # same sample density over the 3 x 3 area
    untiled = build_edges(min_dispersion_vertices(RS_TARGET, dense, rs_system, NO_TILING), rs_system)
    t, u = rs_graph, untiled
    ok = (
        t.dispersion <= RS_TARGET
        and u.dispersion <= RS_TARGET
        and t.n_vertices <= 0.3 * u.n_vertices
        and t.n_edges <= 0.5 * u.n_edges
        and t.mean_out_degree > u.mean_out_degree
    )
    report("6 tiling economy", ok,
           f"tiled |V|={t.n_vertices} |E|={t.n_edges} deg={t.mean_out_degree:.2f}; "
           f"untiled |V|={u.n_vertices} |E|={u.n_edges} deg={u.mean_out_degree:.2f}")
    assert ok


# ------------------------------------------------------------ 7


def test_7_determinism_and_serialization(sweep, di_graphs, tmp_path, capsys):
    cfg = CONFIGS / "reeds_shepp.toml"
    a, b = tmp_path / "a.mpg", tmp_path / "b.mpg"
    assert main(["generate", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["generate", "--config", str(cfg), "--out", str(b)]) == 0
    capsys.readouterr()
    identical = a.read_bytes() == b.read_bytes() and a.with_suffix(".json").read_bytes() == b.with_suffix(".json").read_bytes()

    g = load(a)
    h = from_bytes(to_bytes(g))
    round_trip = (
        to_bytes(h) == a.read_bytes()
        and np.array_equal(h.vertices, g.vertices)
        and np.array_equal(h.edge_cost, g.edge_cost)
        and np.array_equal(h.edge_offset, g.edge_offset)
        and h.history == g.history
    )

    # re-run the graph half of the sweep from the same seeds
    out, records, _, _ = sweep
    b_cfg = bench.MapSpec
    maps = [b_cfg(s, 64, 64, 0.25, bench.RandomCorridors(1.5, 0.2)) for s in range(20)]
    again = bench.run_sweep(di_graphs, [], maps, bench.QueryTemplate(), stop_on_budget=True)

    def key(r):
        return (r.map_id, r.method_id, r.status, r.total_cost, r.collision_checks, r.expansions)

    first = [key(r) for r in records if r.method_id.startswith("dispersion_")]
    reproducible = first == [key(r) for r in again]
    ok = identical and round_trip and reproducible
    report("7 determinism", ok, f"generate identical={identical} round_trip={round_trip} bench_reproducible={reproducible}")
    assert ok


# ------------------------------------------------------------ 8


def test_8_identity_and_symmetry():
    rng = np.random.default_rng(103)
    rs = ReedsShepp(RS_RADIUS)
    x = _rs_states(rng, 1000)
    ident = np.all(rs.costs(x, x) == 0.0)
    for params, v in ((DI_PARAMS, 0.5), (dict(rho=1.0, u_max=2.0, v_max=2.0), 2.0)):
        di = DoubleIntegrator2D(**params)
        y = _di_states(rng, 1000, v)
        ident = ident and np.all(di.costs(y, y) == 0.0)
    a, b = _rs_states(rng, 1000), _rs_states(rng, 1000)
    sym = float(np.max(np.abs(rs.costs(a, b) - rs.costs(b, a))))
    ok = bool(ident) and sym <= 1e-9
    report("8 identity+RS symmetry", ok, f"identity={bool(ident)} max_asym={sym:.1e}")
    assert ok


def _triangle_violations(system, sampler, rng, n=1000):
    a, b, c = sampler(rng, n), sampler(rng, n), sampler(rng, n)
    excess = system.costs(a, c) - (system.costs(a, b) + system.costs(b, c))
    return int(np.sum(excess > 1e-6)), float(excess.max())


def test_8_triangle_inequality():
    rng = np.random.default_rng(104)
    rs_bad, rs_max = _triangle_violations(ReedsShepp(RS_RADIUS), _rs_states, rng)
    di = DoubleIntegrator2D()  # default bounds rho=1, u_max=2, v_max=2
    di_bad, di_max = _triangle_violations(di, lambda r, n: _di_states(r, n, di.v_max), rng)
    ok = rs_bad == 0 and di_bad == 0
    report("8 triangle", ok, f"RS violations={rs_bad}/1000; DI(1,2,2) violations={di_bad}/1000")
    assert ok


@pytest.mark.xfail(strict=True, reason="duration inflation under tight bounds breaks the triangle inequality; see README")
def test_8_triangle_inequality_tight_double_integrator_bounds():
    rng = np.random.default_rng(105)
    di = DoubleIntegrator2D(**DI_PARAMS)
    bad, worst = _triangle_violations(di, lambda r, n: _di_states(r, n, di.v_max), rng)
    report("8 triangle DI(1,1,0.5)", bad == 0, f"violations={bad}/1000 worst_excess={worst:.3f}")
    assert bad == 0


def test_8_history_monotone_and_edge_rule(rs_run, di_run):
    rng = np.random.default_rng(106)
    mono = all(np.all(np.diff(r.dispersion_history) <= 0) for r in (rs_run, di_run))
    for seed in range(10):
        dense = generate_dense(rs_box(), int(rng.integers(30, 300)), "uniform_random", seed)
        try:
            run = min_dispersion_vertices(1e-9, dense, ReedsShepp(RS_RADIUS), TilingSpec((0, 1), (2.0, 2.0), 1), 10)
        except PartialResultError as exc:
            run = exc.run
        mono = mono and bool(np.all(np.diff(run.dispersion_history) <= 0))
    g_rs = _small_graph(ReedsShepp(0.5), rs_box(2.0), 12)
    g_di = _small_graph(DoubleIntegrator2D(**DI_PARAMS), di_box(2.0), 8)
    edges = all(_edge_set(g) == _brute_force_edges(g) and g.n_vertices <= 15 for g in (g_rs, g_di))
    ok = mono and edges
    report("8 monotone+edge rule", ok, f"history_monotone={mono} brute_force_edges={edges}")
    assert ok


def test_8_chain_integrity_and_counter(di_graphs, monkeypatch):
    calls = []
    real = planner_mod.collision_check

    def counting(*args, **kwargs):
        calls.append(1)
        return real(*args, **kwargs)

    monkeypatch.setattr(planner_mod, "collision_check", counting)
    g = di_graphs[1]
    chain_ok = counter_ok = True
    for seed in range(5):
        grid = bench.generate_map(bench.MapSpec(seed, 64, 64, 0.25, bench.RandomCorridors(1.5, 0.2)))
        start, goal = bench.corner_states(grid, 4, 1.0)
        calls.clear()
        r = plan(g, grid, PlanQuery(start, goal, heuristic="free_space_steer"))
        counter_ok &= r.collision_checks == len(calls)
        chain_ok &= r.success and np.array_equal(r.stitched[0].start, g.system.state(start))
        chain_ok &= np.array_equal(r.stitched[-1].end, g.system.state(goal))
        chain_ok &= all(np.array_equal(p.end, q.start) for p, q in zip(r.stitched[:-1], r.stitched[1:]))
        chain_ok &= abs(r.total_cost - sum(t.cost for t in r.stitched)) <= 1e-9
        chain_ok &= all(_free(t, grid, r.collision_resolution) for t in r.stitched)
        for cap in (1, 50, 333):
            calls.clear()
            rb = plan(g, grid, PlanQuery(start, goal, heuristic="free_space_steer", max_collision_checks=cap))
            counter_ok &= rb.status == BUDGET_EXHAUSTED and rb.collision_checks == len(calls) <= cap
    ok = bool(chain_ok and counter_ok)
    report("8 chain+counter", ok, f"chain_integrity={bool(chain_ok)} counter_fidelity={bool(counter_ok)}")
    assert ok
