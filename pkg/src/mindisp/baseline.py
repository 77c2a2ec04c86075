"""Uniform input-space primitives over fixed time segments (comparison method)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .systems import DoubleIntegrator2D


@dataclass(frozen=True)
class UniformInputSpec:
    branching_per_dim: int
    duration: float
    u_max: float | None = None
    system: DoubleIntegrator2D | None = None

    def __post_init__(self):
        if self.branching_per_dim < 2:
            raise ValueError("branching_per_dim must be >= 2")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.system is None:
            object.__setattr__(self, "system", DoubleIntegrator2D())
        if not isinstance(self.system, DoubleIntegrator2D):
            raise TypeError("the uniform-input baseline supports the double integrator only")
        if self.u_max is None:
            object.__setattr__(self, "u_max", self.system.u_max)
        if not self.u_max > 0:
            raise ValueError("u_max must be positive")

    @property
    def label(self) -> str:
        return f"uniform_T{self.duration:g}_b{self.branching_per_dim}"


def input_lattice(spec: UniformInputSpec) -> np.ndarray:
    """All per-axis combinations of evenly spaced inputs on [-u_max, u_max]."""
    axis = np.linspace(-spec.u_max, spec.u_max, spec.branching_per_dim)
    if spec.branching_per_dim % 2:
        axis[spec.branching_per_dim // 2] = 0.0
    return np.array(list(itertools.product(axis, repeat=2)), dtype=np.float64)


def forward_simulate(x, u, duration: float, system: DoubleIntegrator2D):
    """Closed-form constant-input rollout; returns (trajectory, feasible)."""
    traj = system.rollout(x, u, duration)
    feasible = bool(np.all(np.abs(traj.end[2:]) <= system.v_max + 1e-12))
    return traj, feasible


def baseline_expand(x, spec: UniformInputSpec) -> list:
    """(successor state, cost, trajectory) for every feasible lattice input."""
    out = []
    for u in input_lattice(spec):
        traj, ok = forward_simulate(x, u, spec.duration, spec.system)
        if ok:
            out.append((traj.end, traj.cost, traj))
    return out


class BaselineSource:
    """Planner expansion interface over baseline rollouts.

    Nodes are world states; duplicates are merged on a grid snap of
    ``snap`` per coordinate.
    """

    def __init__(self, spec: UniformInputSpec, snap=None, goal_tolerance: float | None = None):
        self.spec = spec
        self.system = spec.system
        if snap is None:
            step = 2.0 * spec.u_max / (spec.branching_per_dim - 1)
            snap = (0.5 * step * spec.duration**2,) * 2 + (0.5 * step * spec.duration,) * 2
        self.snap = np.broadcast_to(np.asarray(snap, dtype=np.float64), (4,)).copy()
        self.default_goal_tolerance = goal_tolerance
        cost_per_step = (spec.u_max**2 * 2 + self.system.rho) * spec.duration
        self.default_resolution = cost_per_step / 10.0
        self.inputs = input_lattice(spec)
        self._peak = float(np.max(np.sum(self.inputs**2, axis=1))) + self.system.rho

    def key(self, node):
        return tuple(int(k) for k in np.floor(np.asarray(node) / self.snap))

    def order(self, node):
        return self.key(node)

    def state_of(self, node):
        return np.asarray(node, dtype=np.float64)

    def _successors(self, x, resolution):
        """Vectorized rollouts: (node, cost, handle, world sample positions)."""
        x = np.asarray(x, dtype=np.float64)
        spec = self.spec
        T = spec.duration
        U = self.inputs
        vend = x[2:] + U * T
        ok = np.all(np.abs(vend) <= self.system.v_max + 1e-12, axis=1)
        U = U[ok]
        if U.shape[0] == 0:
            return []
        n = max(1, int(np.ceil(T * self._peak / resolution)))
        t = np.linspace(0.0, T, n + 1)
        pos = x[None, None, :2] + x[None, None, 2:] * t[None, :, None] + 0.5 * U[:, None, :] * t[None, :, None] ** 2
        ends = np.concatenate([x[:2] + x[2:] * T + 0.5 * U * T**2, x[2:] + U * T], axis=1)
        costs = (np.sum(U * U, axis=1) + self.system.rho) * T
        xt = tuple(float(v) for v in x)
        return [
            (tuple(float(v) for v in ends[i]), float(costs[i]), (xt, tuple(U[i])), pos[i])
            for i in range(U.shape[0])
        ]

    def access(self, start, resolution):
        return self._successors(start, resolution)

    def expand(self, node, resolution):
        return self._successors(node, resolution)

    def trajectory(self, handle):
        x, u = handle
        traj = self.system.rollout(x, u, self.spec.duration)
        return traj
