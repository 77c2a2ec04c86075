"""Dense state-space sample sets (low-discrepancy or seeded random)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

MAX_DIM = 6
KINDS = ("sobol", "halton", "uniform_random")


class SamplingConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StateBox:
    lower: tuple
    upper: tuple
    spatial_dims: tuple = (0, 1)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "spatial_dims", tuple(int(d) for d in self.spatial_dims))
        if len(lo) != len(hi):
            raise SamplingConfigError("lower and upper bounds differ in length")
        if any(not a < b for a, b in zip(lo, hi)):
            raise SamplingConfigError(f"box is empty: lower={lo} upper={hi}")
        sd = self.spatial_dims
        if len(set(sd)) != len(sd) or any(d < 0 or d >= len(lo) for d in sd):
            raise SamplingConfigError(f"bad spatial_dims {sd} for a {len(lo)}-dim box")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p >= np.asarray(self.lower)) & (p < np.asarray(self.upper)), axis=1)


@dataclass(frozen=True, eq=False)
class DenseSampleSet:
    points: np.ndarray
    box: StateBox
    sequence_kind: str
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.points.shape[0]


def _inverse_gray(n: np.ndarray) -> np.ndarray:
    g = n.copy()
    shift = n >> 1
    while np.any(shift):
        g ^= shift
        shift >>= 1
    return g


def sobol_unit(n: int, dim: int) -> np.ndarray:
    """First ``n`` unscrambled Sobol points in natural (radical-inverse) order.

    scipy emits the Gray-code ordering; within every block of 2^k points the
    two orders hold the same points, so re-indexing is exact.
    """
    m = max(1, int(math.ceil(math.log2(max(n, 1)))))
    gray = qmc.Sobol(d=dim, scramble=False).random_base2(m)
    idx = _inverse_gray(np.arange(n, dtype=np.int64))
    return gray[idx]


def unit_points(n: int, dim: int, kind: str, seed: int | None = None) -> np.ndarray:
    if kind == "sobol":
        return sobol_unit(n, dim)
    if kind == "halton":
        return qmc.Halton(d=dim, scramble=False).random(n)
    if kind == "uniform_random":
        return np.random.default_rng(seed).random((n, dim))
    raise SamplingConfigError(f"unknown sequence kind {kind!r}; expected one of {KINDS}")


def generate_dense(box: StateBox, n: int, kind: str = "sobol", seed: int | None = None) -> DenseSampleSet:
    if n < 1:
        raise SamplingConfigError("need at least one sample")
    if box.dim > MAX_DIM:
        raise SamplingConfigError(f"dimension {box.dim} exceeds supported maximum {MAX_DIM}")
    if kind == "uniform_random" and seed is None:
        seed = 0
    u = unit_points(n, box.dim, kind, seed)
    lo = np.asarray(box.lower)
    pts = lo + u * box.widths
    # guard the half-open upper face against rounding
    pts = np.minimum(pts, np.nextafter(np.asarray(box.upper), -np.inf))
    pts.flags.writeable = False
    return DenseSampleSet(pts, box, kind, seed if kind == "uniform_random" else None)


def euclidean_dispersion_estimate(points, box: StateBox, probe_count: int, seed: int = 0) -> float:
    """Monte-Carlo estimate of the largest empty-ball radius in the box."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.size == 0:
        raise ValueError("empty point set")
    if probe_count < 1:
        raise ValueError("probe_count must be >= 1")
    rng = np.random.default_rng(seed)
    probes = np.asarray(box.lower) + rng.random((probe_count, box.dim)) * box.widths
    dist, _ = cKDTree(pts).query(probes)
    return float(dist.max())
