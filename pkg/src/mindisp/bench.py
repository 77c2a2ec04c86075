"""Map generation, planning sweeps, and the completeness property trial."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .baseline import BaselineSource, UniformInputSpec
from .grid import OccupancyGrid
from .planner import BUDGET_EXHAUSTED, SUCCESS, GraphSource, PlanQuery, plan
from .systems import SteeringError

SKIPPED = "skipped"


class MapSpecError(ValueError):
    pass


@dataclass(frozen=True)
class RandomCorridors:
    corridor_width: float
    obstacle_density: float
    border: int = 1

    def __post_init__(self):
        if not self.corridor_width > 0:
            raise MapSpecError("corridor_width must be positive")
        if not 0 <= self.obstacle_density < 1:
            raise MapSpecError("obstacle_density must be in [0, 1)")


@dataclass(frozen=True)
class CertifiedClearance:
    delta: float
    waypoints: tuple
    probe_directions: int = 64
    probe_levels: int = 8

    def __post_init__(self):
        if not self.delta > 0:
            raise MapSpecError("delta must be positive")
        if len(self.waypoints) < 2:
            raise MapSpecError("need at least two waypoints")


@dataclass(frozen=True)
class MapSpec:
    seed: int
    width: int
    height: int
    resolution: float
    style: object
    origin: tuple = (0.0, 0.0)

    @property
    def map_id(self) -> str:
        return f"map{self.seed}"


# ------------------------------------------------------------ corridor maps


def corner_states(grid: OccupancyGrid, dim: int, margin: float) -> tuple:
    """Start near the lower-left corner, goal near the upper-right, at rest."""
    x0, x1, y0, y1 = grid.extent
    start = np.zeros(dim)
    goal = np.zeros(dim)
    start[:2] = (x0 + margin, y0 + margin)
    goal[:2] = (x1 - margin, y1 - margin)
    return start, goal


def _connected(occ, a, b, width_cells):
    """Whether cells a and b are joined by free space wide enough for a square of ``width_cells``."""
    r = max(0, int(math.ceil(width_cells / 2.0)) - 1)
    blocked = ndimage.binary_dilation(occ, iterations=r) if r > 0 else occ
    if blocked[a] or blocked[b]:
        return False
    labels, _ = ndimage.label(~blocked)
    return labels[a] == labels[b] != 0


def random_corridor_grid(spec: MapSpec, margin: float) -> OccupancyGrid:
    """Seeded wall segments added one at a time while a corridor of the given
    width still joins the start and goal corners."""
    style = spec.style
    rng = np.random.default_rng(spec.seed)
    occ = np.zeros((spec.height, spec.width), dtype=bool)
    if style.obstacle_density == 0:
        return OccupancyGrid(occ, spec.resolution, spec.origin)
    b = style.border
    if b:
        occ[:b, :] = occ[-b:, :] = True
        occ[:, :b] = occ[:, -b:] = True
    width_cells = style.corridor_width / spec.resolution
    m = int(math.ceil(margin / spec.resolution))
    a = (m, m)
    z = (spec.height - 1 - m, spec.width - 1 - m)
    keep_clear = np.zeros_like(occ)
    keep_clear[: 2 * m + 1, : 2 * m + 1] = True
    keep_clear[-(2 * m + 1):, -(2 * m + 1):] = True
    target = style.obstacle_density * occ.size
    thick = max(1, int(round(0.5 / spec.resolution)))
    for _ in range(4000):
        if occ.sum() >= target:
            break
        length = int(rng.integers(spec.width // 6, spec.width // 2 + 1))
        x, y = int(rng.integers(0, spec.width)), int(rng.integers(0, spec.height))
        trial = occ.copy()
        if rng.random() < 0.5:
            trial[y:y + thick, x:x + length] = True
        else:
            trial[y:y + length, x:x + thick] = True
        if np.any(trial & keep_clear & ~occ):
            continue
        if _connected(trial, a, z, width_cells):
            occ = trial
    return OccupancyGrid(occ, spec.resolution, spec.origin)


# ------------------------------------------------------------ certified maps


@dataclass(eq=False)
class ClearanceCertificate:
    sigma: list
    sigma_states: np.ndarray
    probes: list
    delta: float
    accepted_points: np.ndarray
    stats: dict = field(default_factory=dict)


def _accept_points(system, cand, S, delta, cell):
    """Points z with J(s, z) <= delta or J(z, s) <= delta for some s in S.

    Only one accepted point per grid cell matters, so candidates are tried
    cell by cell in rounds, nearest to sigma first.
    """
    sd = list(system.spatial_dims)
    radius = delta if system.symmetric else delta * system.v_max / system.rho
    p = 2.0 if system.symmetric else np.inf
    dist, _ = cKDTree(S[:, sd]).query(cand[:, sd], p=p)
    live = np.nonzero(dist <= radius)[0]
    cells = np.floor(cand[live][:, sd] / cell).astype(np.int64)
    order = np.lexsort((dist[live], cells[:, 1], cells[:, 0]))
    live, cells = live[order], cells[order]
    _, first, inverse = np.unique(cells, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    rank = np.arange(live.size) - first[inverse]
    done = np.zeros(first.size, dtype=bool)
    keep = []
    r = 0
    while True:
        pick = np.nonzero((rank == r) & ~done[inverse])[0]
        if pick.size == 0:
            break
        z = cand[live[pick]]
        ok = _min_cost_to_set(system, z, S, radius, forward=True) <= delta
        if not system.symmetric and not ok.all():
            rest = np.nonzero(~ok)[0]
            ok[rest] = _min_cost_to_set(system, z[rest], S, radius, forward=False) <= delta
        done[inverse[pick[ok]]] = True
        keep.append(z[ok])
        r += 1
    return np.concatenate(keep, axis=0) if keep else np.zeros((0, cand.shape[1]))


def _steer_chain(system, waypoints):
    chain = []
    for a, b in zip(waypoints, waypoints[1:]):
        try:
            chain.append(system.steer(a, b))
        except SteeringError as exc:
            raise MapSpecError(f"waypoint steering failed: {exc}") from exc
    return chain


def _min_cost_to_set(system, points, anchors, radius, forward=True):
    """min over anchors a (within a cheap spatial radius) of J(a, z) or J(z, a)."""
    out = np.full(points.shape[0], np.inf)
    if points.shape[0] == 0:
        return out
    sd = list(system.spatial_dims)
    p = 2.0 if system.symmetric else np.inf
    tree = cKDTree(anchors[:, sd])
    near = tree.query_ball_point(points[:, sd], radius, p=p)
    rows = np.repeat(np.arange(points.shape[0]), [len(n) for n in near])
    if rows.size == 0:
        return out
    cols = np.concatenate([np.asarray(n, dtype=np.int64) for n in near])
    if forward:
        c = system.costs(anchors[cols], points[rows])
    else:
        c = system.costs(points[rows], anchors[cols])
    np.minimum.at(out, rows, c)
    return out


def certified_clearance_grid(
    system,
    style: CertifiedClearance,
    resolution: float,
    seed: int = 0,
    graph=None,
    collision_resolution: float | None = None,
    sigma_step: float | None = None,
    probe_anchor_step: float | None = None,
):
    """Occupied everywhere except cells touched by states within cost ``delta``
    (forward or backward) of the reference motion through the waypoints.

    Returns (grid, certificate). The grid is only as free as the sampled
    probes allow, so it is a harder map than one with exact clearance.
    """
    rng = np.random.default_rng(seed)
    delta = float(style.delta)
    wps = [system.state(w) for w in style.waypoints]
    sigma = _steer_chain(system, wps)
    step = sigma_step or delta / 16.0
    S = np.concatenate([system.sample_many([t], step)[0] for t in sigma], axis=0)
    sd = list(system.spatial_dims)
    res_c = collision_resolution or (graph.dispersion / 10.0 if graph is not None else delta / 20.0)

    accepted = [S[:, sd]]
    probes = []

    # random probe trajectories of total cost <= delta, forward from and backward into anchors on sigma
    anchor_step = probe_anchor_step or delta / 4.0
    anchors = np.concatenate([system.sample_many([t], anchor_step)[0] for t in sigma], axis=0)
    n_probe = style.probe_directions * style.probe_levels
    if n_probe:
        levels = np.repeat(np.arange(1, style.probe_levels + 1) / style.probe_levels, style.probe_directions)
        src, dst = [], []
        for a in anchors:
            targets = _random_targets(system, a, levels * delta, rng)
            src.append(np.broadcast_to(a, targets.shape))
            dst.append(targets)
        src = np.concatenate(src)
        dst = np.concatenate(dst)
        pairs = [(src, dst)] if system.symmetric else [(src, dst), (dst, src)]
        for a, b in pairs:
            c = system.costs(a, b)
            idx = np.nonzero(c <= delta)[0]
            if idx.size:
                trajs = system.steer_many(a[idx], b[idx])
                st, owner = system.sample_many(trajs, res_c)
                bounds = np.searchsorted(owner, np.arange(len(trajs) + 1))
                probes.extend(st[bounds[i]:bounds[i + 1]] for i in range(len(trajs)))
        accepted.extend(p[:, sd] for p in probes)

    # planner-relevant points, kept only where they are provably inside the tube
    cand = _planner_points(system, graph, wps, S, delta, res_c)
    if cand.shape[0]:
        accepted.append(_accept_points(system, cand, S, delta, resolution)[:, sd])
    pts = np.concatenate(accepted, axis=0)

    margin = 2.0 * delta + 2.0 * (graph.dispersion if graph is not None else delta) + 4 * resolution
    lo = pts.min(axis=0) - margin
    hi = pts.max(axis=0) + margin
    lo = np.floor(lo / resolution) * resolution
    w = int(math.ceil((hi[0] - lo[0]) / resolution))
    h = int(math.ceil((hi[1] - lo[1]) / resolution))
    occ = np.ones((h, w), dtype=bool)
    grid = OccupancyGrid(occ, resolution, (float(lo[0]), float(lo[1])))
    ix, iy = grid.cells_of(pts)
    occ[iy, ix] = False
    grid = OccupancyGrid(occ, resolution, grid.origin)
    cert = ClearanceCertificate(sigma, S, probes, delta, pts, {"candidates": int(cand.shape[0]), "anchors": len(anchors)})
    return grid, cert


def _random_targets(system, a, costs, rng):
    """Targets roughly at the given cost from ``a`` in random directions."""
    n = costs.shape[0]
    ang = rng.uniform(-math.pi, math.pi, n)
    if system.dim == 3:
        out = np.empty((n, 3))
        out[:, 0] = a[0] + costs * np.cos(ang)
        out[:, 1] = a[1] + costs * np.sin(ang)
        out[:, 2] = rng.uniform(-math.pi, math.pi, n)
        return out
    reach = costs * system.v_max / system.rho
    out = np.empty((n, 4))
    out[:, 0] = a[0] + reach * np.cos(ang)
    out[:, 1] = a[1] + reach * np.sin(ang)
    out[:, 2:] = rng.uniform(-system.v_max, system.v_max, (n, 2))
    return out


def _planner_points(system, graph, wps, S, delta, res_c):
    """Sample states of every trajectory the planner might check near sigma."""
    if graph is None:
        return np.zeros((0, system.dim))
    source = GraphSource(graph)
    sd = list(system.spatial_dims)
    out = []
    start, goal = wps[0], wps[-1]
    access = source.access(start, res_c)
    if access:
        out.append(system.sample_many([c[2] for c in access], res_c)[0])
    lo = S[:, sd].min(axis=0) - 2 * delta
    hi = S[:, sd].max(axis=0) + 2 * delta
    tlo = np.floor(lo / np.asarray(graph.tiling.tile_extent)).astype(int) - 1
    thi = np.floor(hi / np.asarray(graph.tiling.tile_extent)).astype(int) + 1
    tree = cKDTree(S[:, sd])
    local_states = _edge_states(graph, res_c)
    near_nodes = []
    for tx in range(tlo[0], thi[0] + 1):
        for ty in range(tlo[1], thi[1] + 1):
            for v in range(graph.n_vertices):
                s = graph.world_state(v, (tx, ty))
                if tree.query(s[sd])[0] <= 2 * delta:
                    near_nodes.append((v, (tx, ty), s))
    for v, tile, s in near_nodes:
        shift = graph.tile_shift(tile)
        for e in graph.out_edges(v):
            st = local_states[e].copy()
            st[:, sd] += shift
            out.append(st)
    # departure trajectories to the goal
    if near_nodes:
        xs = np.array([n[2] for n in near_nodes])
        gb = np.broadcast_to(goal, xs.shape)
        c = system.costs(xs, gb)
        idx = np.nonzero(c <= delta)[0]
        if idx.size:
            deps = system.steer_many(xs[idx], gb[idx])
            out.append(system.sample_many(deps, res_c)[0])
    return np.concatenate(out, axis=0) if out else np.zeros((0, system.dim))


def _edge_states(graph, resolution):
    states, owner = graph.system.sample_many(graph.trajectories, resolution)
    bounds = np.searchsorted(owner, np.arange(graph.n_edges + 1))
    return [states[bounds[e]:bounds[e + 1]] for e in range(graph.n_edges)]


def verify_certificate(grid: OccupancyGrid, cert: ClearanceCertificate) -> bool:
    """Re-check that sigma and every probe prefix lie in free cells."""
    if not grid.is_free(cert.sigma_states[:, :2]):
        return False
    for p in cert.probes:
        if p.shape[0] and not grid.is_free(p[:, :2]):
            return False
    return grid.is_free(cert.accepted_points)


def generate_map(spec: MapSpec, system=None, graph=None, margin: float = 1.0) -> OccupancyGrid:
    style = spec.style
    if isinstance(style, RandomCorridors):
        return random_corridor_grid(spec, margin)
    if isinstance(style, CertifiedClearance):
        system = system or (graph.system if graph is not None else None)
        if system is None:
            raise MapSpecError("certified_clearance maps need a system")
        grid, _ = certified_clearance_grid(system, style, spec.resolution, spec.seed, graph)
        return grid
    raise MapSpecError(f"unknown map style {type(style).__name__}")


# ------------------------------------------------------------ sweeps


@dataclass
class ExperimentRecord:
    map_id: str
    method_id: str
    status: str
    total_cost: float | None
    collision_checks: int
    expansions: int
    wall_time: float
    dispersion: float | None = None

    def row(self) -> dict:
        return {
            "map_id": self.map_id,
            "method_id": self.method_id,
            "dispersion": "" if self.dispersion is None else repr(self.dispersion),
            "status": self.status,
            "total_cost": "" if self.total_cost is None else repr(self.total_cost),
            "collision_checks": self.collision_checks,
            "expansions": self.expansions,
            "wall_time": f"{self.wall_time:.4f}",
        }


RECORD_FIELDS = ["map_id", "method_id", "dispersion", "status", "total_cost", "collision_checks", "expansions", "wall_time"]
AGG_FIELDS = ["method_id", "dispersion", "maps", "successes", "mean_collision_checks", "mean_cost"]


@dataclass(frozen=True)
class QueryTemplate:
    margin: float = 1.0
    goal_cost_tolerance: float | None = None
    collision_resolution: float | None = None
    max_collision_checks: int = 100_000
    heuristic: str = "free_space_steer"


def graph_method_id(graph) -> str:
    return f"dispersion_{graph.dispersion:.4g}_V{graph.n_vertices}"


def _run_method(args):
    method_id, source, disp, grids, template, stop_on_budget = args
    records, lines = [], []
    stopped = False
    for map_id, grid in grids:
        if stopped:
            records.append(ExperimentRecord(map_id, method_id, SKIPPED, None, 0, 0, 0.0, disp))
            continue
        start, goal = corner_states(grid, source.system.dim, template.margin)
        q = PlanQuery(start, goal, template.goal_cost_tolerance, template.collision_resolution,
                      template.max_collision_checks, template.heuristic)
        t0 = time.perf_counter()
        r = plan(source, grid, q)
        wall = time.perf_counter() - t0
        records.append(ExperimentRecord(map_id, method_id, r.status, r.total_cost if r.success else None,
                                        r.collision_checks, r.expansions, wall, disp))
        lines.append(f"{method_id} {map_id} {r.status} checks={r.collision_checks}")
        if stop_on_budget and r.status == BUDGET_EXHAUSTED:
            stopped = True
    return records, lines


def run_sweep(graphs, baseline_specs, maps, template: QueryTemplate = QueryTemplate(), stop_on_budget: bool = False,
              snap=None, log=None, jobs: int = 1):
    """One record per (method, map). Baselines share the loosest graph goal tolerance.

    With ``stop_on_budget`` a method whose run exhausts the budget is not run
    on the remaining maps; those pairs are recorded as ``skipped``. With
    ``jobs > 1`` methods run in worker processes; record order is unchanged.
    """
    grids = [(m.map_id, generate_map(m, margin=template.margin)) for m in maps]
    methods = [(graph_method_id(g), GraphSource(g), g.dispersion) for g in graphs]
    base_tol = template.goal_cost_tolerance or (max(g.dispersion for g in graphs) if graphs else None)
    for spec in baseline_specs:
        methods.append((spec.label, BaselineSource(spec, snap=snap, goal_tolerance=base_tol), None))
    tasks = [(mid, src, disp, grids, template, stop_on_budget) for mid, src, disp in methods]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_method, tasks))
    else:
        results = map(_run_method, tasks)
    records = []
    for recs, lines in results:
        records.extend(recs)
        if log:
            for line in lines:
                log(line)
    return records


def aggregate(records) -> list:
    """Per-method means. Checks average over completed runs; cost over successes,
    and is None unless every completed run succeeded."""
    out = []
    order = []
    for r in records:
        if r.method_id not in order:
            order.append(r.method_id)
    for mid in order:
        rs = [r for r in records if r.method_id == mid]
        ran = [r for r in rs if r.status != SKIPPED]
        succ = [r for r in ran if r.status == SUCCESS]
        checks = float(np.mean([r.collision_checks for r in ran])) if ran else None
        cost = float(np.mean([r.total_cost for r in succ])) if succ and len(succ) == len(ran) else None
        out.append({
            "method_id": mid,
            "dispersion": rs[0].dispersion,
            "maps": len(rs),
            "successes": len(succ),
            "mean_collision_checks": checks,
            "mean_cost": cost,
            "budget_exhausted": any(r.status == BUDGET_EXHAUSTED for r in rs),
        })
    return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csvs(records, outdir, seeds=()) -> tuple:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    header = f"# seeds={','.join(str(s) for s in seeds)}\n"
    rec_path = outdir / "records.csv"
    agg_path = outdir / "aggregate.csv"
    with rec_path.open("w", newline="") as fh:
        fh.write(header)
        w = csv.DictWriter(fh, fieldnames=RECORD_FIELDS)
        w.writeheader()
        for r in records:
            w.writerow(r.row())
    with agg_path.open("w", newline="") as fh:
        fh.write(header)
        w = csv.DictWriter(fh, fieldnames=AGG_FIELDS)
        w.writeheader()
        for a in aggregate(records):
            w.writerow({k: _fmt(a[k]) for k in AGG_FIELDS})
    return rec_path, agg_path


def read_records(path) -> list:
    with Path(path).open() as fh:
        rows = [line for line in fh if not line.startswith("#")]
    out = []
    for row in csv.DictReader(rows):
        out.append(ExperimentRecord(
            row["map_id"], row["method_id"], row["status"],
            float(row["total_cost"]) if row["total_cost"] else None,
            int(row["collision_checks"]), int(row["expansions"]), float(row["wall_time"]),
            float(row["dispersion"]) if row["dispersion"] else None,
        ))
    return out


def format_table(aggregates) -> str:
    """Plain-text table: one row per method."""
    lines = [f"{'method':<28} {'dispersion':>10} {'success':>9} {'avg checks':>12} {'avg cost':>10}"]
    for a in aggregates:
        disp = "" if a["dispersion"] is None else f"{a['dispersion']:.4g}"
        if a["budget_exhausted"]:
            checks, cost = f">{100000}", "N/A"
        else:
            checks = "N/A" if a["mean_collision_checks"] is None else f"{a['mean_collision_checks']:.0f}"
            cost = "N/A" if a["mean_cost"] is None else f"{a['mean_cost']:.4g}"
        lines.append(f"{a['method_id']:<28} {disp:>10} {a['successes']:>4}/{a['maps']:<4} {checks:>12} {cost:>10}")
    return "\n".join(lines)


# ------------------------------------------------------------ completeness


@dataclass
class TrialOutcome:
    seed: int
    status: str
    total_cost: float | None
    collision_checks: int
    certified: bool


@dataclass
class CompletenessSummary:
    success_fraction: float
    outcomes: list


def random_waypoints(system, rng, n: int = 3, step: float = 2.0) -> list:
    """A start at the origin followed by random hops of roughly ``step``."""
    pts = [np.zeros(system.dim)]
    if system.dim == 3:
        pts[0][2] = rng.uniform(-math.pi, math.pi)
    for _ in range(n - 1):
        ang = rng.uniform(-math.pi, math.pi)
        nxt = pts[-1].copy()
        dist = step * rng.uniform(0.75, 1.25)
        nxt[0] += dist * math.cos(ang)
        nxt[1] += dist * math.sin(ang)
        if system.dim == 3:
            nxt[2] = rng.uniform(-math.pi, math.pi)
        pts.append(nxt)
    return pts


def completeness_trial(graph, delta: float, trials: int, seed: int = 0, resolution: float | None = None,
                       goal_cost_tolerance: float | None = None, map_resolution: float | None = None,
                       waypoints: int = 3, step: float | None = None, probe_directions: int = 64,
                       probe_levels: int = 8, max_collision_checks: int = 100_000) -> CompletenessSummary:
    """Plan on ``trials`` certified maps of clearance ``delta``; return the success fraction."""
    system = graph.system
    res_c = resolution or graph.dispersion / 10.0
    tol = goal_cost_tolerance or delta / 2.0
    cell = map_resolution or graph.dispersion / 10.0
    step = step or 2.0 * delta
    outcomes = []
    for k in range(trials):
        s = seed + k
        rng = np.random.default_rng(s)
        wps = random_waypoints(system, rng, waypoints, step)
        style = CertifiedClearance(delta, tuple(map(tuple, wps)), probe_directions, probe_levels)
        grid, cert = certified_clearance_grid(system, style, cell, s, graph, res_c)
        ok = verify_certificate(grid, cert)
        q = PlanQuery(wps[0], wps[-1], tol, res_c, max_collision_checks, "free_space_steer")
        r = plan(graph, grid, q)
        outcomes.append(TrialOutcome(s, r.status, r.total_cost if r.success else None, r.collision_checks, ok))
    frac = sum(o.status == SUCCESS for o in outcomes) / max(1, trials)
    return CompletenessSummary(frac, outcomes)


def empty_map_trial(graph, trials: int, seed: int = 0) -> CompletenessSummary:
    """Infinite clearance: plan between random waypoints on an all-free grid."""
    system = graph.system
    grid = OccupancyGrid.empty(1, 1, 1.0, (1e6, 1e6))
    outcomes = []
    for k in range(trials):
        rng = np.random.default_rng(seed + k)
        wps = random_waypoints(system, rng, 2, 4.0 * graph.dispersion)
        r = plan(graph, grid, PlanQuery(wps[0], wps[-1], heuristic="free_space_steer"))
        outcomes.append(TrialOutcome(seed + k, r.status, r.total_cost if r.success else None, r.collision_checks, True))
    return CompletenessSummary(sum(o.status == SUCCESS for o in outcomes) / max(1, trials), outcomes)


COMPLETENESS_FIELDS = ["seed", "status", "total_cost", "collision_checks", "certified"]


def write_completeness(summary: CompletenessSummary, path, delta: float, dispersion: float, seeds=()) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# seeds={','.join(str(s) for s in seeds)} delta={delta!r} dispersion={dispersion!r}\n")
        w = csv.DictWriter(fh, fieldnames=COMPLETENESS_FIELDS)
        w.writeheader()
        for o in summary.outcomes:
            w.writerow({"seed": o.seed, "status": o.status, "total_cost": _fmt(o.total_cost),
                        "collision_checks": o.collision_checks, "certified": int(o.certified)})
    return path
