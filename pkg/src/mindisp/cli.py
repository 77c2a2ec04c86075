"""mindisp command line: generate, plan, bench, inspect."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench, config, graph as graphmod
from .baseline import UniformInputSpec
from .dispersion import NO_TILING, DispersionConfigError, PartialResultError, TilingSpec, min_dispersion_vertices
from .grid import MapFileError, OccupancyGrid, load_pgm
from .planner import BUDGET_EXHAUSTED, NO_PATH, SUCCESS, PlanQuery, QueryError, plan
from .sampling import SamplingConfigError, StateBox, generate_dense
from .systems import SteeringError, make_system

EXIT_OK, EXIT_USAGE, EXIT_NO_PATH, EXIT_BUDGET, EXIT_IO = 0, 1, 2, 3, 4
_STATUS_EXIT = {SUCCESS: EXIT_OK, NO_PATH: EXIT_NO_PATH, BUDGET_EXHAUSTED: EXIT_BUDGET}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------ pipeline


def make_system_from(cfg: config.Config):
    s = cfg.system
    if s.kind == "reeds_shepp":
        return make_system("reeds_shepp", turning_radius=s.turning_radius)
    return make_system("double_integrator", rho=s.rho, u_max=s.u_max, v_max=s.v_max)


def state_box(cfg: config.Config, system) -> StateBox:
    L = cfg.tiling.tile_extent
    if system.dim == 3:
        return StateBox((0.0, 0.0, -math.pi), (L, L, math.pi))
    v = system.v_max
    return StateBox((0.0, 0.0, -v, -v), (L, L, v, v))


def tiling_of(cfg: config.Config) -> TilingSpec:
    if not cfg.tiling.enabled:
        return NO_TILING
    L = cfg.tiling.tile_extent
    return TilingSpec((0, 1), (L, L), cfg.tiling.neighbor_radius)


def dispersion_run(cfg: config.Config, system, target=None, max_vertices=None, allow_partial=False):
    dense = generate_dense(state_box(cfg, system), config.dense_count(cfg), cfg.sampling.kind, cfg.sampling.seed)
    target = cfg.dispersion.target if target is None else target
    cap = max_vertices or cfg.dispersion.max_vertices
    try:
        return min_dispersion_vertices(target, dense, system, tiling_of(cfg), cap)
    except PartialResultError as exc:
        if allow_partial:
            return exc.run
        raise


def build_graph(cfg: config.Config):
    system = make_system_from(cfg)
    run = dispersion_run(cfg, system)
    return graphmod.build_edges(run, system)


def _load_config(args) -> config.Config:
    cfg = config.load(args.config) if args.config else config.Config()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, sampling=replace(cfg.sampling, seed=args.seed), bench=replace(cfg.bench, seed=args.seed))
    if getattr(args, "target", None) is not None:
        cfg = replace(cfg, dispersion=replace(cfg.dispersion, target=args.target))
    if getattr(args, "dense_count", None) is not None:
        cfg = replace(cfg, sampling=replace(cfg.sampling, count=args.dense_count))
    config.validate(cfg)
    return cfg


# ------------------------------------------------------------ commands


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    t0 = time.perf_counter()
    g = build_graph(cfg)
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    graphmod.save(g, out, extra={"seed": cfg.sampling.seed, "config": cfg.to_dict()})
    print(f"seed: {cfg.sampling.seed}")
    print(f"system: {cfg.system.kind}")
    print(f"vertices: {g.n_vertices}")
    print(f"edges: {g.n_edges}")
    print(f"dispersion: {g.dispersion:.6g}")
    print(f"mean_out_degree: {g.mean_out_degree:.3f}")
    print(f"elapsed_s: {elapsed:.2f}")
    print(f"wrote: {out}")
    return EXIT_OK


def _parse_state(text, dim, what):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{what} must be comma-separated numbers, got {text!r}") from None
    if len(vals) != dim:
        raise UsageError(f"{what} needs {dim} values for this system, got {len(vals)}")
    return tuple(vals)


def cmd_plan(args) -> int:
    g = graphmod.load(args.graph)
    grid = load_pgm(args.map) if args.map else OccupancyGrid.empty(1, 1, 1.0, (1e12, 1e12))
    dim = g.vertices.shape[1]
    start = _parse_state(args.start, dim, "--start")
    goal = _parse_state(args.goal, dim, "--goal")
    q = PlanQuery(start, goal, args.goal_tolerance, args.resolution, args.max_checks, args.heuristic)
    r = plan(g, grid, q, record_states=bool(args.svg))
    r.meta["seed"] = args.seed
    r.meta["graph"] = str(args.graph)
    r.meta["map"] = str(args.map) if args.map else None
    if args.json:
        Path(args.json).write_text(r.to_json() + "\n")
    if args.svg:
        from .plotting import plot_plan

        plot_plan(grid if args.map else _frame_grid(r, g), r, g.system, args.svg)
    print(f"seed: {args.seed}")
    print(f"status: {r.status}")
    print(f"total_cost: {r.total_cost:.6g}" if r.success else "total_cost: N/A")
    print(f"collision_checks: {r.collision_checks}")
    print(f"expansions: {r.expansions}")
    return _STATUS_EXIT[r.status]


def _frame_grid(result, g):
    """An all-free grid framing the explored region, for drawing only."""
    pts = [np.asarray(s)[:2] for s in result.expanded_states + result.node_sequence] or [np.zeros(2)]
    pts = np.array(pts)
    lo = pts.min(axis=0) - 2 * g.dispersion
    hi = pts.max(axis=0) + 2 * g.dispersion
    res = g.dispersion / 10.0
    w = max(1, int(math.ceil((hi[0] - lo[0]) / res)))
    h = max(1, int(math.ceil((hi[1] - lo[1]) / res)))
    return OccupancyGrid.empty(w, h, res, tuple(lo))


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    b = cfg.bench
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    system = make_system_from(cfg)
    graphs = []
    if b.graph_vertices:
        run = dispersion_run(cfg, system, target=1e-12, max_vertices=max(b.graph_vertices), allow_partial=True)
        sizes = sorted(set(min(n, len(run.vertices)) for n in b.graph_vertices))
        graphs = [graphmod.build_edges(run.prefix(n), system) for n in sizes]
    specs = []
    if system.name == "double_integrator":
        specs = [UniformInputSpec(k, float(T), system=system) for T in b.baseline_durations for k in b.baseline_branching]
    seeds = list(range(b.seed, b.seed + b.maps))
    maps = [bench.MapSpec(s, b.map_width, b.map_height, b.map_resolution,
                          bench.RandomCorridors(b.corridor_width, b.obstacle_density)) for s in seeds]
    tmpl = bench.QueryTemplate(b.margin, None, None, cfg.planner.max_collision_checks, b.heuristic)
    log = (lambda m: print(m, file=sys.stderr)) if args.verbose else None
    records = bench.run_sweep(graphs, specs, maps, tmpl, stop_on_budget=b.stop_on_budget, log=log,
                              jobs=args.jobs) if (graphs or specs) else []
    rec_path, agg_path = bench.write_csvs(records, outdir, seeds)
    aggs = bench.aggregate(records)
    from .plotting import plot_sweep

    plot_sweep(aggs, outdir / "summary.svg")
    print(f"seed: {b.seed}")
    print(bench.format_table(aggs))
    if b.completeness_trials and graphs:
        g = graphs[-1]
        res = g.dispersion / 10.0
        delta = 2.0 * g.dispersion + b.completeness_margin * g.dispersion
        summ = bench.completeness_trial(g, delta, b.completeness_trials, b.seed, resolution=res)
        bench.write_completeness(summ, outdir / "completeness.csv", delta, g.dispersion, seeds=[b.seed])
        print(f"completeness: delta={delta:.4g} d={g.dispersion:.4g} success_fraction={summ.success_fraction:.3f}")
    print(f"wrote: {rec_path} {agg_path} {outdir / 'summary.svg'}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    g = graphmod.load(args.graph)
    d = g.dispersion
    print(f"system: {g.system.name} {json.dumps(g.system.params(), sort_keys=True)}")
    print(f"format_version: {g.format_version}")
    print(f"vertices: {g.n_vertices}")
    print(f"edges: {g.n_edges}")
    print(f"dispersion: {d:.6g}")
    print(f"mean_out_degree: {g.mean_out_degree:.3f}")
    t = g.tiling
    print(f"tiling: spatial_dims={list(t.spatial_dims)} tile_extent={list(t.tile_extent)} neighbor_radius={t.neighbor_radius}")
    if g.n_edges:
        counts, edges = np.histogram(g.edge_cost, bins=args.bins, range=(0.0, 2.0 * d))
        print("edge cost histogram:")
        for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
            print(f"  [{lo:9.4f}, {hi:9.4f})  {c}")
    if args.vertices:
        for i, v in enumerate(g.vertices):
            print(f"  v{i}: " + ", ".join(f"{x:.6g}" for x in v))
    if args.svg:
        from .plotting import plot_graph

        plot_graph(g, args.svg, tiles=args.tiles)
        print(f"wrote: {args.svg}")
    return EXIT_OK


# ------------------------------------------------------------ entry


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mindisp", description="Minimum-dispersion motion primitive graphs and planning.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="build a primitive graph from a config")
    g.add_argument("--config")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--target", type=float, help="target dispersion (inf allowed)")
    g.add_argument("--dense-count", type=int)
    g.set_defaults(func=cmd_generate)

    pl = sub.add_parser("plan", help="plan on a map with a stored graph")
    pl.add_argument("graph")
    pl.add_argument("--map", help="PGM occupancy map with JSON sidecar (default: empty world)")
    pl.add_argument("--start", required=True)
    pl.add_argument("--goal", required=True)
    pl.add_argument("--goal-tolerance", type=float)
    pl.add_argument("--resolution", type=float)
    pl.add_argument("--max-checks", type=int, default=100_000)
    pl.add_argument("--heuristic", choices=("zero", "free_space_steer"), default="zero")
    pl.add_argument("--json")
    pl.add_argument("--svg")
    pl.add_argument("--seed", type=int, default=0)
    pl.set_defaults(func=cmd_plan)

    b = sub.add_parser("bench", help="run the comparison sweep and write CSV + SVG")
    b.add_argument("--config")
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int)
    b.add_argument("--dense-count", type=int)
    b.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("inspect", help="summarize a graph file")
    i.add_argument("graph")
    i.add_argument("--svg")
    i.add_argument("--tiles", type=int, default=1)
    i.add_argument("--bins", type=int, default=10)
    i.add_argument("--vertices", action="store_true")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (config.ConfigError, UsageError, QueryError, DispersionConfigError, SamplingConfigError,
            PartialResultError, SteeringError, bench.MapSpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, graphmod.GraphFileError, MapFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
