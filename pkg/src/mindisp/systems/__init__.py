"""Dynamical systems with optimal steering functions."""

from .base import StateError, SteeringError, Trajectory, UnreachableError, wrap_angle
from .double_integrator import DIPath, DoubleIntegrator2D, inner_effort
from .reeds_shepp import ReedsShepp, RSPath

SYSTEMS = {"reeds_shepp": ReedsShepp, "double_integrator": DoubleIntegrator2D}


def make_system(kind: str, **params):
    try:
        cls = SYSTEMS[kind]
    except KeyError:
        raise ValueError(f"unknown system {kind!r}; expected one of {sorted(SYSTEMS)}") from None
    return cls(**params)


def system_kind(system) -> str:
    return system.name


def quasimetric(a, b, system):
    """(J(a, b), J(b, a), max of the two)."""
    fwd = system.cost(a, b)
    bwd = system.cost(b, a)
    return fwd, bwd, max(fwd, bwd)


__all__ = [
    "DIPath",
    "DoubleIntegrator2D",
    "ReedsShepp",
    "RSPath",
    "SYSTEMS",
    "StateError",
    "SteeringError",
    "Trajectory",
    "UnreachableError",
    "inner_effort",
    "make_system",
    "quasimetric",
    "system_kind",
    "wrap_angle",
]
