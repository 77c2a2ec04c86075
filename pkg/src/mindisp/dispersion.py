"""Greedy minimum-dispersion vertex selection under the tiled quasimetric."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .sampling import DenseSampleSet

log = logging.getLogger(__name__)

DEFAULT_MAX_VERTICES = 512


class DispersionConfigError(ValueError):
    pass


class PartialResultError(RuntimeError):
    """Vertex cap reached before the target dispersion; ``run`` holds progress."""

    def __init__(self, message, run):
        super().__init__(message)
        self.run = run


@dataclass(frozen=True)
class TilingSpec:
    spatial_dims: tuple = (0, 1)
    tile_extent: tuple = (1.0, 1.0)
    neighbor_radius: int = 1

    def __post_init__(self):
        object.__setattr__(self, "spatial_dims", tuple(int(d) for d in self.spatial_dims))
        object.__setattr__(self, "tile_extent", tuple(float(e) for e in self.tile_extent))
        if len(self.spatial_dims) != len(self.tile_extent):
            raise DispersionConfigError("tile_extent needs one length per spatial dimension")
        if any(not e > 0 for e in self.tile_extent):
            raise DispersionConfigError(f"tile extents must be positive: {self.tile_extent}")
        if self.neighbor_radius < 0:
            raise DispersionConfigError("neighbor_radius must be >= 0")

    @property
    def k(self) -> int:
        return len(self.spatial_dims)

    def offsets(self, radius: int | None = None) -> np.ndarray:
        """Integer tile offsets in {-r..r}^k, lexicographic, zero included."""
        r = self.neighbor_radius if radius is None else radius
        if self.k == 0:
            return np.zeros((1, 0), dtype=np.int64)
        rng = range(-r, r + 1)
        return np.array(list(itertools.product(rng, repeat=self.k)), dtype=np.int64)

    def displacement(self, offsets, dim: int) -> np.ndarray:
        """Full-state translation vectors for integer tile offsets."""
        offsets = np.atleast_2d(np.asarray(offsets))
        disp = np.zeros((offsets.shape[0], dim))
        for j, d in enumerate(self.spatial_dims):
            disp[:, d] = offsets[:, j] * self.tile_extent[j]
        return disp


NO_TILING = TilingSpec((), (), 0)


@dataclass(frozen=True, eq=False)
class TiledPoints:
    states: np.ndarray
    source: np.ndarray
    offsets: np.ndarray


def tile_points(vertices, tiling: TilingSpec) -> TiledPoints:
    """Copies of ``vertices`` translated by every neighbour-lattice offset."""
    V = np.atleast_2d(np.asarray(vertices, dtype=np.float64))
    if any(d >= V.shape[1] for d in tiling.spatial_dims):
        raise DispersionConfigError(f"spatial dims {tiling.spatial_dims} invalid for {V.shape[1]}-dim states")
    offs = tiling.offsets()
    disp = tiling.displacement(offs, V.shape[1])
    states = (V[:, None, :] + disp[None, :, :]).reshape(-1, V.shape[1])
    source = np.repeat(np.arange(V.shape[0]), offs.shape[0])
    offsets = np.tile(offs, (V.shape[0], 1))
    return TiledPoints(states, source, offsets)


def symmetric_cost(system, xs, targets) -> np.ndarray:
    """max(J(x, t), J(t, x)) for every dense point x (rows) and target t (cols)."""
    xs = np.asarray(xs, dtype=np.float64)
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    fwd = system.costs(xs[:, None, :], targets[None, :, :])
    if getattr(system, "symmetric", False):
        return fwd
    bwd = system.costs(targets[None, :, :], xs[:, None, :])
    return np.maximum(fwd, bwd)


@dataclass(frozen=True, eq=False)
class DispersionRun:
    vertices: np.ndarray
    dispersion_history: tuple
    final_dispersion: float
    dense: DenseSampleSet
    tiling: TilingSpec
    jmin: np.ndarray | None
    target: float
    dense_index: tuple = ()
    meta: dict = field(default_factory=dict)

    def prefix(self, n: int) -> "DispersionRun":
        """The run as it stood with the first ``n`` vertices (jmin not kept)."""
        if not 1 <= n <= len(self.vertices):
            raise ValueError(f"prefix length {n} out of range")
        hist = self.dispersion_history[:n]
        return replace(
            self,
            vertices=self.vertices[:n],
            dispersion_history=hist,
            final_dispersion=hist[-1],
            jmin=self.jmin if n == len(self.vertices) else None,
            dense_index=self.dense_index[:n],
        )

    def at_dispersion(self, target: float) -> "DispersionRun":
        """Shortest prefix whose dispersion is at or below ``target``."""
        for n, d in enumerate(self.dispersion_history, start=1):
            if d <= target:
                return replace(self.prefix(n), target=target)
        raise ValueError(f"run never reached dispersion {target}; final was {self.final_dispersion}")


def min_dispersion_vertices(
    target: float,
    dense: DenseSampleSet,
    system,
    tiling: TilingSpec,
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> DispersionRun:
    """Greedily add the dense sample farthest (in max(J fwd, J bwd)) from the tiled set.

    J_min is a running minimum over a growing target set, so each iteration
    only needs costs against the tiled copies of the newest vertex.
    """
    if not target > 0:
        raise DispersionConfigError("target dispersion must be positive")
    pts = dense.points
    if pts.shape[0] == 0:
        raise DispersionConfigError("dense sample set is empty")
    zero = np.asarray(system.zero_state(), dtype=np.float64)
    if not dense.box.contains(zero)[0]:
        raise DispersionConfigError("the zero state must lie inside the dense box")

    vertices = [zero]
    dense_index = [-1]
    history = []
    jmin = np.full(pts.shape[0], np.inf)
    newest = zero
    while True:
        tiled = tile_points(newest[None, :], tiling)
        jmin = np.minimum(jmin, symmetric_cost(system, pts, tiled.states).min(axis=1))
        d = float(jmin.max())
        history.append(d)
        log.info("iteration %d |V|=%d d=%.6g", len(history), len(vertices), d)
        run = DispersionRun(
            np.array(vertices), tuple(history), d, dense, tiling, jmin.copy(), float(target), tuple(dense_index)
        )
        if d <= target:
            return run
        if len(vertices) >= max_vertices:
            raise PartialResultError(
                f"vertex cap {max_vertices} reached at dispersion {d:.6g} > target {target:.6g}", run
            )
        k = int(np.argmax(jmin))
        newest = np.array(pts[k], dtype=np.float64)
        vertices.append(newest)
        dense_index.append(k)


def estimate_dispersion(vertices, dense: DenseSampleSet, system, tiling: TilingSpec) -> float:
    """max over dense samples of min over tiled vertices of max(J fwd, J bwd)."""
    V = np.atleast_2d(np.asarray(vertices, dtype=np.float64))
    if V.size == 0:
        raise ValueError("vertex set is empty")
    tiled = tile_points(V, tiling)
    best = np.full(dense.points.shape[0], np.inf)
    step = max(1, 65536 // max(1, dense.points.shape[0]))
    for lo in range(0, tiled.states.shape[0], step):
        best = np.minimum(best, symmetric_cost(system, dense.points, tiled.states[lo:lo + step]).min(axis=1))
    return float(best.max())
