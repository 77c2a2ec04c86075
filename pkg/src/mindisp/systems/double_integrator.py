"""Planar double integrator (quadrotor position/velocity model).

State ``(x, y, vx, vy)``, input is acceleration, running cost ``|u|^2`` plus
``rho`` per second.  Steering is bi-level: the fixed-duration minimum-effort
problem has a closed form (per-axis cubic), and the duration is found by a
bracketing scan followed by golden-section refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import StateError, Trajectory, UnreachableError, as_state, shift_state

T_LO = 1e-3
T_HI = 60.0
T_CAP = 600.0
T_FLOOR = 1e-9
GRID = 64
REL_TOL = 1e-8
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_CHUNK = 8192
_SLACK = 1e-9


def inner_effort(x1, x2, T):
    """Minimum of the integrated squared input for fixed duration ``T``.

    Returns ``(effort, coeffs)`` with ``coeffs[axis] = (a0, a1, a2, a3)`` of the
    optimal cubic position polynomial on each axis.
    """
    if not T > 0:
        raise ValueError(f"duration must be positive, got {T}")
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    coeffs = np.zeros((2, 4))
    effort = 0.0
    for ax in range(2):
        p0, v0 = x1[ax], x1[ax + 2]
        p1, v1 = x2[ax], x2[ax + 2]
        dp = p1 - p0 - v0 * T
        dv = v1 - v0
        a3 = (dv * T - 2.0 * dp) / T**3
        a2 = (3.0 * dp - dv * T) / T**2
        coeffs[ax] = (p0, v0, a2, a3)
        effort += 12.0 * dp * dp / T**3 - 12.0 * dp * dv / T**2 + 4.0 * dv * dv / T
    return float(effort), coeffs


def _objective_terms(x1, x2):
    """Coefficients of effort(T) = c3/T^3 - c2/T^2 + c1/T summed over axes."""
    dp = x2[..., 0:2] - x1[..., 0:2]
    v0 = x1[..., 2:4]
    v1 = x2[..., 2:4]
    c3 = 12.0 * np.sum(dp * dp, axis=-1)
    c2 = 12.0 * np.sum(dp * (v0 + v1), axis=-1)
    c1 = 4.0 * np.sum(v0 * v0 + v0 * v1 + v1 * v1, axis=-1)
    return c3, c2, c1


def _feasible(x1, x2, T, u_max, v_max):
    """Input and speed bounds for the optimal cubic of duration T (broadcast)."""
    lim_u = u_max * (1.0 + _SLACK)
    lim_v = v_max * (1.0 + _SLACK)
    ok = None
    inv = 1.0 / T
    for ax in range(2):
        v0 = x1[..., ax + 2]
        v1 = x2[..., ax + 2]
        dpT = (x2[..., ax] - x1[..., ax]) * inv
        acc0 = (6.0 * dpT - (4.0 * v0 + 2.0 * v1)) * inv
        acc1 = ((2.0 * v0 + 4.0 * v1) - 6.0 * dpT) * inv
        # v(t) extremum of the cubic: v0 - a2^2 / (3 a3) at t = -a2 / (3 a3)
        a2T = 3.0 * dpT - (2.0 * v0 + v1)
        a3T = (v0 + v1) - 2.0 * dpT
        with np.errstate(divide="ignore", invalid="ignore"):
            s = -a2T / (3.0 * a3T)
            vs = v0 - a2T * a2T / (3.0 * a3T)
        good = (np.abs(acc0) <= lim_u) & (np.abs(acc1) <= lim_u)
        good &= ~((s > 0.0) & (s < 1.0)) | (np.abs(vs) <= lim_v)
        ok = good if ok is None else ok & good
    return ok


def _bilevel(x1, x2, rho, u_max, v_max, strict=True):
    """Vectorised optimal duration and cost for arrays of state pairs.

    A log-spaced scan over the bracket locates the best feasible duration
    (the stationarity condition is a quartic, so the objective can have two
    local minima); golden-section search then refines inside the neighbouring
    grid cells.  Brackets whose best point sits on an edge are shifted.
    """
    n = x1.shape[0]
    c3, c2, c1 = _objective_terms(x1, x2)
    same = np.all(x1 == x2, axis=1)

    def obj(T, idx):
        val = c3[idx] / T**3 - c2[idx] / T**2 + c1[idx] / T + rho * T
        feas = _feasible(x1[idx], x2[idx], T, u_max, v_max)
        return np.where(feas, val, np.inf)

    best_T = np.zeros(n)
    best_J = np.zeros(n)
    todo = np.nonzero(~same)[0]
    if todo.size:
        # when the unconstrained minimiser is feasible it is also the constrained one
        Ts = _stationary_min(c3[todo], c2[todo], c1[todo], rho)
        with np.errstate(invalid="ignore"):
            fast = np.isfinite(obj(Ts, todo))
        best_T[todo[fast]] = Ts[fast]
        best_J[todo[fast]] = obj(Ts[fast], todo[fast])
        todo = todo[~fast]
    lo_b, hi_b = np.full(n, T_LO), np.full(n, T_HI)
    ratio = np.linspace(0.0, 1.0, GRID)
    for _ in range(32):
        if todo.size == 0:
            break
        Tg = lo_b[todo, None] * (hi_b[todo, None] / lo_b[todo, None]) ** ratio[None, :]
        vals = obj(Tg.T, todo).T
        k = np.argmin(vals, axis=1)
        rows = np.arange(todo.size)
        kval = vals[rows, k]
        none = ~np.isfinite(kval)
        grow = ((k == GRID - 1) | none) & (hi_b[todo] < T_CAP)
        shrink = (k == 0) & ~none & (lo_b[todo] > T_FLOOR)
        g = todo[grow]
        lo_b[g] = np.where(none[grow], hi_b[g], Tg[grow, GRID - 2])
        hi_b[g] = np.minimum(hi_b[g] * 10.0, T_CAP)
        sh = todo[shrink]
        hi_b[sh] = Tg[shrink, 1]
        lo_b[sh] = np.maximum(lo_b[sh] * 1e-2, T_FLOOR)
        done = ~(grow | shrink)
        failed = done & none
        if np.any(failed):
            if strict:
                bad = todo[failed][0]
                raise UnreachableError(
                    f"no feasible duration up to {T_CAP} s between {x1[bad]} and {x2[bad]}"
                )
            best_T[todo[failed]] = np.inf
            best_J[todo[failed]] = np.inf
        fin = done & ~none
        idx = todo[fin]
        kk = k[fin]
        r = np.arange(idx.size)
        Tfin = Tg[fin]
        left = Tfin[r, np.maximum(kk - 1, 0)]
        mid = Tfin[r, kk]
        right = Tfin[r, np.minimum(kk + 1, GRID - 1)]
        best_T[idx], best_J[idx] = _refine(obj, idx, left, mid, right)
        todo = todo[~done]
    if todo.size:
        raise UnreachableError("duration bracketing did not settle")
    return best_T, best_J


def _stationary_min(c3, c2, c1, rho):
    """Global minimiser over T > 0 of c3/T^3 - c2/T^2 + c1/T + rho*T.

    Stationary points solve rho*T^4 - c1*T^2 + 2*c2*T - 3*c3 = 0; roots come
    from batched companion matrices and are polished by Newton steps.
    """
    n = c3.shape[0]
    comp = np.zeros((n, 4, 4))
    comp[:, 0, 1] = c1 / rho
    comp[:, 0, 2] = -2.0 * c2 / rho
    comp[:, 0, 3] = 3.0 * c3 / rho
    comp[:, 1, 0] = comp[:, 2, 1] = comp[:, 3, 2] = 1.0
    roots = np.linalg.eigvals(comp)
    real = np.abs(roots.imag) <= 1e-7 * np.maximum(1.0, np.abs(roots.real))
    T = np.where(real & (roots.real > 0), roots.real, np.nan)
    for _ in range(3):
        g = ((rho * T * T - c1[:, None]) * T + 2.0 * c2[:, None]) * T - 3.0 * c3[:, None]
        dg = (4.0 * rho * T * T - 2.0 * c1[:, None]) * T + 2.0 * c2[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dg != 0, g / dg, 0.0)
        T = np.where(np.isfinite(T - step) & (T - step > 0), T - step, T)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = c3[:, None] / T**3 - c2[:, None] / T**2 + c1[:, None] / T + rho * T
    f = np.where(np.isfinite(f), f, np.inf)
    k = np.argmin(f, axis=1)
    out = T[np.arange(n), k]
    return np.where(np.isfinite(f[np.arange(n), k]), out, np.nan)


def _boundary(obj, idx, bad, good):
    """Bisect toward the feasibility boundary between an infeasible and a feasible T."""
    for _ in range(80):
        active = np.abs(good - bad) > REL_TOL * good
        if not np.any(active):
            break
        m = 0.5 * (bad + good)
        f = np.isfinite(obj(m, idx))
        good = np.where(active & f, m, good)
        bad = np.where(active & ~f, m, bad)
    return good


def _refine(obj, idx, left, mid, right):
    """Golden-section search on [left, right], clipped to the feasible part."""
    a = left.copy()
    b = right.copy()
    for end in (a, b):
        bad = ~np.isfinite(obj(end, idx))
        if np.any(bad):
            end[bad] = _boundary(obj, idx[bad], end[bad], mid[bad])
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = obj(c, idx)
    fd = obj(d, idx)
    for _ in range(200):
        # converged entries are frozen so results do not depend on batch makeup
        active = b - a > REL_TOL * 0.5 * (a + b)
        if not np.any(active):
            break
        go_left = fc < fd
        na, nb = np.where(go_left, a, c), np.where(go_left, d, b)
        nc = np.where(go_left, nb - _INVPHI * (nb - na), d)
        nd = np.where(go_left, c, na + _INVPHI * (nb - na))
        fp = obj(np.where(go_left, nc, nd), idx)
        nfc, nfd = np.where(go_left, fp, fd), np.where(go_left, fc, fp)
        a, b = np.where(active, na, a), np.where(active, nb, b)
        c, d = np.where(active, nc, c), np.where(active, nd, d)
        fc, fd = np.where(active, nfc, fc), np.where(active, nfd, fd)
    cands = np.stack([c, d, a, b, mid])
    vals = np.stack([obj(cands[i], idx) for i in range(cands.shape[0])])
    j = np.argmin(vals, axis=0)
    cols = np.arange(idx.size)
    return cands[j, cols], vals[j, cols]


@dataclass(frozen=True, eq=False)
class DIPath(Trajectory):
    """Piecewise-free polynomial motion: ``coeffs[axis] = (a0, a1, a2, a3)``."""

    coeffs: np.ndarray = None
    rho: float = 1.0

    def position(self, t):
        t = np.asarray(t, dtype=np.float64)
        c = self.coeffs
        return np.stack([c[ax, 0] + c[ax, 1] * t + c[ax, 2] * t**2 + c[ax, 3] * t**3 for ax in range(2)], axis=-1)

    def velocity(self, t):
        t = np.asarray(t, dtype=np.float64)
        c = self.coeffs
        return np.stack([c[ax, 1] + 2 * c[ax, 2] * t + 3 * c[ax, 3] * t**2 for ax in range(2)], axis=-1)

    def acceleration(self, t):
        t = np.asarray(t, dtype=np.float64)
        c = self.coeffs
        return np.stack([2 * c[ax, 2] + 6 * c[ax, 3] * t for ax in range(2)], axis=-1)

    def state_at(self, t: float) -> np.ndarray:
        t = min(max(t, 0.0), self.duration)
        return np.concatenate([self.position(t), self.velocity(t)])

    def times(self, resolution: float) -> np.ndarray:
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.duration == 0.0:
            return np.zeros(1)
        acc = self.acceleration(np.array([0.0, self.duration]))
        peak = float(np.max(np.sum(acc * acc, axis=1))) + self.rho
        n = max(1, int(math.ceil(self.duration * peak / resolution)))
        return np.linspace(0.0, self.duration, n + 1)

    def sample(self, resolution: float) -> np.ndarray:
        t = self.times(resolution)
        return np.concatenate([self.position(t), self.velocity(t)], axis=1)

    def translated(self, offset) -> "DIPath":
        c = np.array(self.coeffs)
        c[:, 0] += np.asarray(offset, dtype=np.float64)
        c.flags.writeable = False
        return DIPath(
            start=shift_state(self.start, offset),
            end=shift_state(self.end, offset),
            cost=self.cost,
            duration=self.duration,
            coeffs=c,
            rho=self.rho,
        )


class DoubleIntegrator2D:
    """Planar double integrator with per-axis input and speed bounds."""

    name = "double_integrator"
    dim = 4
    spatial_dims = (0, 1)
    symmetric = False

    def __init__(self, rho: float = 1.0, u_max: float = 2.0, v_max: float = 2.0):
        for key, val in (("rho", rho), ("u_max", u_max), ("v_max", v_max)):
            if not val > 0:
                raise ValueError(f"{key} must be positive, got {val}")
        self.rho = float(rho)
        self.u_max = float(u_max)
        self.v_max = float(v_max)

    def __repr__(self):
        return f"DoubleIntegrator2D(rho={self.rho!r}, u_max={self.u_max!r}, v_max={self.v_max!r})"

    def params(self) -> dict:
        return {"rho": self.rho, "u_max": self.u_max, "v_max": self.v_max}

    def zero_state(self) -> np.ndarray:
        return as_state(np.zeros(4), 4)

    def state(self, x) -> np.ndarray:
        s = as_state(x, 4)
        if np.any(np.abs(s[2:]) > self.v_max * (1.0 + _SLACK)):
            raise StateError(f"velocity {s[2:]} exceeds v_max={self.v_max}")
        return s

    def _pairs(self, a, b):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        a, b = np.broadcast_arrays(a, b)
        return a.shape[:-1], a.reshape(-1, 4), b.reshape(-1, 4)

    def costs(self, a, b, strict: bool = True) -> np.ndarray:
        shape, a, b = self._pairs(a, b)
        out = np.empty(a.shape[0])
        for lo in range(0, a.shape[0], _CHUNK):
            _, out[lo:lo + _CHUNK] = _bilevel(a[lo:lo + _CHUNK], b[lo:lo + _CHUNK], self.rho, self.u_max, self.v_max, strict)
        return out.reshape(shape)

    def cost(self, a, b) -> float:
        return float(self.costs(np.asarray(a)[None], np.asarray(b)[None])[0])

    def durations(self, a, b):
        shape, a, b = self._pairs(a, b)
        T, J = _bilevel(a, b, self.rho, self.u_max, self.v_max)
        return T.reshape(shape), J.reshape(shape)

    def cost_lower_bound(self, a, b) -> np.ndarray:
        """Cheap bound J >= max(2 sqrt(rho |dv|^2), rho * max|dp| / v_max)."""
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        dv = b[..., 2:4] - a[..., 2:4]
        dp = np.abs(b[..., 0:2] - a[..., 0:2])
        lb1 = 2.0 * np.sqrt(self.rho * np.sum(dv * dv, axis=-1))
        lb2 = self.rho * np.max(dp, axis=-1) / self.v_max
        return np.maximum(lb1, lb2)

    def heuristic_costs(self, a, b) -> np.ndarray:
        """Admissible estimate of J: the input/speed-unconstrained optimum,
        raised to the speed-bound travel-time cost where that is larger."""
        shape, a, b = self._pairs(a, b)
        c3, c2, c1 = _objective_terms(a, b)
        out = np.zeros(a.shape[0])
        move = ~np.all(a == b, axis=1)
        if np.any(move):
            T = _stationary_min(c3[move], c2[move], c1[move], self.rho)
            with np.errstate(invalid="ignore"):
                val = c3[move] / T**3 - c2[move] / T**2 + c1[move] / T + self.rho * T
            out[move] = np.where(np.isfinite(val), val, 0.0)
        return np.maximum(out, self.cost_lower_bound(a, b)).reshape(shape)

    def steer(self, a, b) -> DIPath:
        return self.steer_many(np.asarray(a)[None], np.asarray(b)[None])[0]

    def steer_many(self, a, b) -> list:
        _, a, b = self._pairs(np.atleast_2d(a), np.atleast_2d(b))
        out = []
        for lo in range(0, a.shape[0], _CHUNK):
            ca, cb = a[lo:lo + _CHUNK], b[lo:lo + _CHUNK]
            T, J = _bilevel(ca, cb, self.rho, self.u_max, self.v_max)
            for i in range(ca.shape[0]):
                out.append(self.path_from_duration(ca[i], cb[i], T[i], J[i]))
        return out

    def path_from_duration(self, a, b, T, cost=None) -> DIPath:
        start = as_state(a, 4)
        end = as_state(b, 4)
        if T == 0.0 or np.array_equal(start, end):
            c = np.zeros((2, 4))
            c[:, 0] = start[:2]
            c[:, 1] = start[2:]
            c.flags.writeable = False
            return DIPath(start, end, 0.0, 0.0, c, self.rho)
        effort, c = inner_effort(start, end, T)
        c.flags.writeable = False
        if cost is None:
            cost = effort + self.rho * T
        return DIPath(start, end, float(cost), float(T), c, self.rho)

    def rollout(self, x, u, duration: float) -> DIPath:
        """Constant-input motion; cost is (|u|^2 + rho) * duration."""
        x = as_state(x, 4)
        u = np.asarray(u, dtype=np.float64)
        c = np.zeros((2, 4))
        c[:, 0] = x[:2]
        c[:, 1] = x[2:]
        c[:, 2] = 0.5 * u
        c.flags.writeable = False
        end = np.concatenate([x[:2] + x[2:] * duration + 0.5 * u * duration**2, x[2:] + u * duration])
        cost = (float(u @ u) + self.rho) * duration
        return DIPath(x, as_state(end, 4), cost, float(duration), c, self.rho)

    def sample_many(self, trajectories, resolution: float):
        states = [t.sample(resolution) for t in trajectories]
        owner = np.repeat(np.arange(len(states)), [s.shape[0] for s in states])
        if not states:
            return np.zeros((0, 4)), owner
        return np.concatenate(states, axis=0), owner
