"""Shared state/trajectory types for the steering systems."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SteeringError(Exception):
    """Base class for steering failures."""


class UnreachableError(SteeringError):
    """No feasible duration was found inside the search cap."""


class StateError(ValueError):
    """A state has the wrong shape or violates the state constraints."""


def wrap_angle(theta):
    """Wrap angles to [-pi, pi)."""
    return (np.asarray(theta, dtype=float) + math.pi) % (2.0 * math.pi) - math.pi


def as_state(x, dim: int) -> np.ndarray:
    arr = np.array(x, dtype=np.float64).reshape(-1)
    if arr.shape != (dim,):
        raise StateError(f"expected a {dim}-dimensional state, got shape {np.shape(x)}")
    if not np.all(np.isfinite(arr)):
        raise StateError(f"state has non-finite entries: {arr}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A free-space motion between two states.

    ``cost`` is the optimal steering cost J and ``duration`` the time span
    (arc length for the car).  Subclasses carry the system-specific
    representation and know how to evaluate themselves.
    """

    start: np.ndarray
    end: np.ndarray
    cost: float
    duration: float

    def sample(self, resolution: float) -> np.ndarray:
        """States along the trajectory, at most ``resolution`` apart in cost."""
        raise NotImplementedError

    def translated(self, offset) -> "Trajectory":
        """Copy shifted by a planar offset (dynamics are position-invariant)."""
        raise NotImplementedError

    @property
    def is_trivial(self) -> bool:
        return self.cost == 0.0


def shift_state(state: np.ndarray, offset, spatial_dims=(0, 1)) -> np.ndarray:
    out = np.array(state, dtype=np.float64)
    off = np.asarray(offset, dtype=np.float64)
    for k, d in enumerate(spatial_dims):
        out[d] += off[k]
    out.flags.writeable = False
    return out
