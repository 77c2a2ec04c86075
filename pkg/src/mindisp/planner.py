"""Best-first search over implicit primitive graphs with collision checking."""

from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import PrimitiveGraph
from .grid import OccupancyGrid
from .systems.base import Trajectory

DEFAULT_MAX_CHECKS = 100_000
HEURISTICS = ("zero", "free_space_steer")
SUCCESS, NO_PATH, BUDGET_EXHAUSTED = "success", "no_path", "budget_exhausted"


class QueryError(ValueError):
    pass


class PlanFailedError(RuntimeError):
    pass


@dataclass
class CheckCounter:
    count: int = 0


def _positions(states, spatial_dims=(0, 1)):
    return np.asarray(states)[:, list(spatial_dims)]


def collision_check(traj, grid: OccupancyGrid, resolution: float, system, counter: CheckCounter | None = None,
                    positions=None) -> bool:
    """True iff every sample of ``traj`` lies in a free cell. Counts one check.

    ``positions`` may carry the trajectory's samples at ``resolution`` when the
    caller already has them.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if counter is not None:
        counter.count += 1
    if positions is None:
        states, _ = system.sample_many([traj], resolution)
        positions = _positions(states, system.spatial_dims)
    return grid.is_free(positions)


@dataclass(frozen=True)
class PlanQuery:
    start: tuple
    goal: tuple
    goal_cost_tolerance: float | None = None
    collision_resolution: float | None = None
    max_collision_checks: int = DEFAULT_MAX_CHECKS
    heuristic: str = "zero"
    departure: str = "steer"

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        object.__setattr__(self, "goal", tuple(float(v) for v in self.goal))
        for name in ("goal_cost_tolerance", "collision_resolution"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise QueryError(f"{name} must be positive")
        if self.max_collision_checks < 1:
            raise QueryError("max_collision_checks must be >= 1")
        if self.heuristic not in HEURISTICS:
            raise QueryError(f"unknown heuristic {self.heuristic!r}; expected one of {HEURISTICS}")
        if self.departure not in ("steer", "bound"):
            raise QueryError(f"unknown departure mode {self.departure!r}")


@dataclass
class PlanResult:
    status: str
    node_sequence: list = field(default_factory=list)
    stitched: list = field(default_factory=list)
    total_cost: float = math.nan
    collision_checks: int = 0
    expansions: int = 0
    open_list_peak: int = 0
    expanded_states: list = field(default_factory=list)
    generated_states: list = field(default_factory=list)
    goal_cost_tolerance: float = math.nan
    collision_resolution: float = math.nan
    meta: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.status == SUCCESS

    def to_dict(self) -> dict:
        out = {
            "status": self.status,
            "total_cost": None if not self.success else self.total_cost,
            "collision_checks": self.collision_checks,
            "expansions": self.expansions,
            "open_list_peak": self.open_list_peak,
            "goal_cost_tolerance": self.goal_cost_tolerance,
            "collision_resolution": self.collision_resolution,
            "node_sequence": [list(map(float, s)) for s in self.node_sequence],
            "trajectories": [
                {"start": list(map(float, t.start)), "end": list(map(float, t.end)), "cost": t.cost, "duration": t.duration}
                for t in self.stitched
            ],
        }
        out.update(self.meta)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


class GraphSource:
    """Adapts a PrimitiveGraph to the planner's expansion interface."""

    def __init__(self, graph: PrimitiveGraph):
        self.graph = graph
        self.system = graph.system
        self.default_goal_tolerance = graph.dispersion
        self.default_resolution = graph.dispersion / 10.0

    def state_of(self, node):
        return self.graph.world_state(*node)

    def key(self, node):
        return node

    def order(self, node):
        return (node[0],) + tuple(node[1])

    def access(self, start, resolution):
        """Trajectories from ``start`` to vertices in the surrounding 3^k tiles with cost < 2d."""
        g = self.graph
        base = np.array(g.tile_of(start), dtype=np.int64)
        offs = g.tiling.offsets(1)
        nodes, targets = [], []
        for off in offs:
            tile = tuple(int(c) for c in base + off)
            for v in range(g.n_vertices):
                nodes.append((v, tile))
                targets.append(g.world_state(v, tile))
        if not targets:
            return []
        targets = np.array(targets)
        src = np.broadcast_to(np.asarray(start, dtype=np.float64), targets.shape)
        costs = self.system.costs(src, targets)
        keep = np.nonzero(costs < 2.0 * g.dispersion)[0]
        paths = self.system.steer_many(src[keep], targets[keep]) if keep.size else []
        return [(nodes[k], p.cost, p, None) for k, p in zip(keep, paths)]

    def expand(self, node, resolution):
        """Successors as (node, cost, trajectory, world sample positions)."""
        g = self.graph
        v, tile = node
        local = g.edge_samples(resolution)
        shift = g.tile_shift(tile)
        tile_arr = np.asarray(tile, dtype=np.int64)
        out = []
        for e in g.out_edges(v):
            succ = (int(g.edge_dst[e]), tuple(int(c) for c in tile_arr + g.edge_offset[e]))
            out.append((succ, float(g.edge_cost[e]), (e, tuple(tile)), local[e] + shift))
        return out

    def trajectory(self, handle):
        if not isinstance(handle, Trajectory):
            # pin endpoints to the node states so consecutive pieces chain exactly
            e, tile = handle
            g = self.graph
            t = g.trajectories[e].translated(g.tile_shift(tile))
            dst_tile = tuple(int(c) for c in np.asarray(tile) + g.edge_offset[e])
            start = g.world_state(int(g.edge_src[e]), tile)
            end = g.world_state(int(g.edge_dst[e]), dst_tile)
            start.flags.writeable = False
            end.flags.writeable = False
            return replace(t, start=start, end=end)
        return handle


def _candidate_positions(source, cands, resolution):
    """Fill in missing sample positions for a list of candidates."""
    missing = [i for i, c in enumerate(cands) if c[3] is None]
    if missing:
        trajs = [c if isinstance(c, Trajectory) else source.trajectory(c) for c in (cands[i][2] for i in missing)]
        states, owner = source.system.sample_many(trajs, resolution)
        pos = _positions(states, source.system.spatial_dims)
        bounds = np.searchsorted(owner, np.arange(len(missing) + 1))
        for j, i in enumerate(missing):
            node, cost, handle, _ = cands[i]
            cands[i] = (node, cost, handle, pos[bounds[j]:bounds[j + 1]])
    return cands


def as_source(obj):
    return GraphSource(obj) if isinstance(obj, PrimitiveGraph) else obj


def plan(graph, grid: OccupancyGrid, query: PlanQuery, record_states: bool = False) -> PlanResult:
    """Best-first search from ``query.start`` to within ``goal_cost_tolerance`` of ``query.goal``.

    ``graph`` is a PrimitiveGraph or any object with the same expansion
    interface (``access``, ``expand``, ``state_of``, ``key``, ``order``,
    ``trajectory``). The start is the root node: expanding it connects to the
    graph. Every expanded node tries a collision-free steer to the goal; that
    yields a goal entry in the open list, and the search ends when the goal
    entry is popped.
    """
    source = as_source(graph)
    system = source.system
    start = system.state(query.start)
    goal = system.state(query.goal)
    tol = query.goal_cost_tolerance if query.goal_cost_tolerance is not None else source.default_goal_tolerance
    if tol is None:
        raise QueryError("goal_cost_tolerance is required for this expansion source")
    res = query.collision_resolution if query.collision_resolution is not None else source.default_resolution
    sd = list(system.spatial_dims)
    if not grid.is_free(start[sd][None]):
        raise QueryError("start state is in collision")
    if not grid.is_free(goal[sd][None]):
        raise QueryError("goal state is in collision")

    counter = CheckCounter()
    cap = query.max_collision_checks
    use_h = query.heuristic == "free_space_steer"
    result = PlanResult(NO_PATH, goal_cost_tolerance=float(tol), collision_resolution=float(res))

    tie = itertools.count()
    ROOT, GOAL = ("root",), ("goal",)
    parent = {}  # key -> (parent key, handle, cost)
    states = {ROOT: start}
    best_g = {ROOT: 0.0}
    to_goal = {}  # key -> exact J(node, goal) when known to be <= tol
    closed = set()
    open_heap = [(0.0, 0.0, (-1,), next(tie), ROOT, None)]
    peak = 1
    budget_hit = False

    def goal_costs(nodes_states):
        """(heuristic, exact J(x, goal) where it could be <= tol else inf)."""
        xs = np.array(nodes_states)
        gb = np.broadcast_to(goal, xs.shape)
        if use_h:
            h = system.heuristic_costs(xs, gb)
        else:
            h = system.cost_lower_bound(xs, gb)
        exact = np.full(xs.shape[0], np.inf)
        near = np.nonzero(h <= tol)[0]
        if near.size:
            exact[near] = system.costs(xs[near], gb[near])
        return (h if use_h else np.zeros_like(h)), exact

    while open_heap:
        f, g, _, _, key, node = heapq.heappop(open_heap)
        if key in closed:
            continue
        if key is GOAL:
            result.status = SUCCESS
            break
        closed.add(key)
        x = states[key]
        result.expansions += 1
        if record_states:
            result.expanded_states.append(x)

        # departability
        jg = to_goal.get(key)
        if jg is None and key is ROOT:
            jg = float(goal_costs([x])[1][0])
        if jg is not None and jg <= tol and (GOAL not in best_g or g + jg < best_g[GOAL]):
            dep = system.steer(x, goal)
            ok = True
            if query.departure == "steer":
                if counter.count >= cap:
                    budget_hit = True
                    break
                ok = collision_check(dep, grid, res, system, counter)
            if ok:
                best_g[GOAL] = g + dep.cost
                parent[GOAL] = (key, dep, dep.cost)
                heapq.heappush(open_heap, (g + dep.cost, g + dep.cost, (-2,), next(tie), GOAL, None))
                if g + dep.cost <= f:
                    # nothing left in the open list can beat this goal entry
                    result.status = SUCCESS
                    break

        cands = source.access(x, res) if key is ROOT else source.expand(node, res)
        fresh = []
        for succ, cost, handle, pos in cands:
            k = source.key(succ)
            if k in closed or g + cost >= best_g.get(k, math.inf):
                continue
            fresh.append((succ, cost, handle, pos))
        if not fresh:
            continue
        remaining = cap - counter.count
        if remaining <= 0:
            budget_hit = True
            break
        if len(fresh) > remaining:
            fresh = fresh[:remaining]
            budget_hit = True
        fresh = _candidate_positions(source, fresh, res)
        kept = [c for c in fresh if collision_check(c[2], grid, res, system, counter, positions=c[3])]
        if kept:
            succ_states = [source.state_of(c[0]) for c in kept]
            hs, js = goal_costs(succ_states)
            for (succ, cost, handle, _), sx, h, jx in zip(kept, succ_states, hs, js):
                k = source.key(succ)
                ng = g + cost
                if ng >= best_g.get(k, math.inf):
                    continue
                best_g[k] = ng
                states[k] = sx
                parent[k] = (key, handle, cost)
                if jx <= tol:
                    to_goal[k] = float(jx)
                else:
                    to_goal.pop(k, None)
                hv = float(h)
                heapq.heappush(open_heap, (ng + hv, ng, source.order(succ), next(tie), k, succ))
                if record_states:
                    result.generated_states.append(sx)
            peak = max(peak, len(open_heap))
        if budget_hit:
            break

    result.collision_checks = counter.count
    result.open_list_peak = peak
    if result.status == SUCCESS:
        chain = []
        k = GOAL
        while k is not ROOT:
            pk, handle, cost = parent[k]
            chain.append(handle if isinstance(handle, Trajectory) else source.trajectory(handle))
            k = pk
        chain.reverse()
        result.stitched = chain
        result.total_cost = float(sum(t.cost for t in chain))
        result.node_sequence = [np.asarray(start)] + [np.asarray(t.end) for t in chain]
    elif budget_hit:
        result.status = BUDGET_EXHAUSTED
    return result


def plan_cost_optimality_gap(graph, grid: OccupancyGrid, query: PlanQuery) -> float:
    """Plan cost divided by the free-space steering cost from start to goal."""
    source = as_source(graph)
    res = plan(source, grid, query)
    if not res.success:
        raise PlanFailedError(f"plan failed with status {res.status}")
    direct = source.system.cost(query.start, query.goal)
    if direct == 0.0:
        return 1.0
    return res.total_cost / direct
