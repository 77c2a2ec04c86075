"""Reeds-Shepp car: shortest forward/backward paths with bounded turning.

Path words follow the classical closed-form families (CSC, CCC, CCCC, CCSC,
CCSCC) with the time-flip, reflection and backwards symmetries.  Everything
operates on arrays of relative poses so that dispersion runs can evaluate
hundreds of thousands of pairs per call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import Trajectory, as_state, shift_state, wrap_angle

PI = math.pi
HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi
ZERO = 10 * np.finfo(float).eps
_CHUNK = 16384

_STEER = {"L": 1, "R": -1, "S": 0}


def _mod2pi(x):
    v = np.fmod(x, TWO_PI)
    v = np.where(v < -PI, v + TWO_PI, v)
    return np.where(v > PI, v - TWO_PI, v)


def _polar(x, y):
    return np.hypot(x, y), np.arctan2(y, x)


def _tau_omega(u, v, xi, eta, phi):
    delta = _mod2pi(u - v)
    a = np.sin(u) - np.sin(delta)
    b = np.cos(u) - np.cos(delta) - 1.0
    t1 = np.arctan2(eta * a - xi * b, xi * a + eta * b)
    t2 = 2.0 * (np.cos(delta) - np.cos(v) - np.cos(u)) + 3.0
    tau = np.where(t2 < 0, _mod2pi(t1 + PI), _mod2pi(t1))
    omega = _mod2pi(tau - u + v - phi)
    return tau, omega


# Each family returns (ok, t, u, v) for the canonical left-forward word.

def _lpsplp(x, y, phi):
    u, t = _polar(x - np.sin(phi), y - 1.0 + np.cos(phi))
    v = _mod2pi(phi - t)
    return (t >= -ZERO) & (v >= -ZERO), t, u, v


def _lpsprp(x, y, phi):
    u1, t1 = _polar(x + np.sin(phi), y - 1.0 - np.cos(phi))
    u1 = u1 * u1
    ok = u1 >= 4.0
    u = np.sqrt(np.maximum(u1 - 4.0, 0.0))
    theta = np.arctan2(2.0, u)
    t = _mod2pi(t1 + theta)
    v = _mod2pi(t - phi)
    return ok & (t >= -ZERO) & (v >= -ZERO), t, u, v


def _lprml(x, y, phi):
    u1, theta = _polar(x - np.sin(phi), y - 1.0 + np.cos(phi))
    ok = u1 <= 4.0
    u = -2.0 * np.arcsin(np.clip(0.25 * u1, -1.0, 1.0))
    t = _mod2pi(theta + 0.5 * u + PI)
    v = _mod2pi(phi - t + u)
    return ok & (t >= -ZERO) & (u <= ZERO), t, u, v


def _lprupluml(x, y, phi):
    xi = x + np.sin(phi)
    eta = y - 1.0 - np.cos(phi)
    rho = 0.25 * (2.0 + np.sqrt(xi * xi + eta * eta))
    ok = rho <= 1.0
    u = np.arccos(np.clip(rho, -1.0, 1.0))
    t, v = _tau_omega(u, -u, xi, eta, phi)
    return ok & (t >= -ZERO) & (v <= ZERO), t, u, v


def _lprumlumrp(x, y, phi):
    xi = x + np.sin(phi)
    eta = y - 1.0 - np.cos(phi)
    rho = (20.0 - xi * xi - eta * eta) / 16.0
    ok = (rho >= 0.0) & (rho <= 1.0)
    u = -np.arccos(np.clip(rho, 0.0, 1.0))
    ok &= u >= -HALF_PI
    t, v = _tau_omega(u, u, xi, eta, phi)
    return ok & (t >= -ZERO) & (v >= -ZERO), t, u, v


def _lprmsmlm(x, y, phi):
    rho, theta = _polar(x - np.sin(phi), y - 1.0 + np.cos(phi))
    ok = rho >= 2.0
    r = np.sqrt(np.maximum(rho * rho - 4.0, 0.0))
    u = 2.0 - r
    t = _mod2pi(theta + np.arctan2(r, -2.0))
    v = _mod2pi(phi - HALF_PI - t)
    return ok & (t >= -ZERO) & (u <= ZERO) & (v <= ZERO), t, u, v


def _lprmsmrm(x, y, phi):
    xi = x + np.sin(phi)
    eta = y - 1.0 - np.cos(phi)
    rho, theta = _polar(-eta, xi)
    ok = rho >= 2.0
    t = theta
    u = 2.0 - rho
    v = _mod2pi(t + HALF_PI - phi)
    return ok & (t >= -ZERO) & (u <= ZERO) & (v <= ZERO), t, u, v


def _lprmslmrp(x, y, phi):
    xi = x + np.sin(phi)
    eta = y - 1.0 - np.cos(phi)
    rho, _ = _polar(xi, eta)
    ok = rho >= 2.0
    u = 4.0 - np.sqrt(np.maximum(rho * rho - 4.0, 0.0))
    ok &= u <= ZERO
    t = _mod2pi(np.arctan2((4.0 - u) * xi - 2.0 * eta, -2.0 * xi + (u - 4.0) * eta))
    v = _mod2pi(t - phi)
    return ok & (t >= -ZERO) & (v >= -ZERO), t, u, v


# shape -> (segment lengths from (t, u, v), constant part of the length)
_SHAPES = {
    "tuv": (lambda t, u, v: (t, u, v), 0.0),
    "cccc_a": (lambda t, u, v: (t, u, -u, v), 0.0),
    "cccc_b": (lambda t, u, v: (t, u, u, v), 0.0),
    "ccsc": (lambda t, u, v: (t, -HALF_PI, u, v), HALF_PI),
    "ccscc": (lambda t, u, v: (t, -HALF_PI, u, -HALF_PI, v), PI),
}
_TRANSFORMS = ("id", "timeflip", "reflect", "both")


@dataclass(frozen=True)
class _Word:
    family: object
    shape: str
    letters: str
    transform: str
    backwards: bool

    def inputs(self, x, y, phi):
        if self.backwards:
            c, s = np.cos(phi), np.sin(phi)
            x, y = x * c + y * s, x * s - y * c
        if self.transform == "timeflip":
            return -x, y, -phi
        if self.transform == "reflect":
            return x, -y, -phi
        if self.transform == "both":
            return -x, -y, phi
        return x, y, phi

    def lengths(self, t, u, v):
        segs = _SHAPES[self.shape][0](t, u, v)
        if self.transform in ("timeflip", "both"):
            segs = tuple(-s for s in segs)
        if self.backwards:
            segs = segs[::-1]
        return segs

    def total(self, t, u, v):
        if self.shape == "cccc_a" or self.shape == "cccc_b":
            base = np.abs(t) + 2.0 * np.abs(u) + np.abs(v)
        else:
            base = np.abs(t) + np.abs(u) + np.abs(v)
        return base + _SHAPES[self.shape][1]


def _make_words():
    groups = [
        (_lpsplp, "tuv", "LSL", False),
        (_lpsprp, "tuv", "LSR", False),
        (_lprml, "tuv", "LRL", False),
        (_lprml, "tuv", "LRL", True),
        (_lprupluml, "cccc_a", "LRLR", False),
        (_lprumlumrp, "cccc_b", "LRLR", False),
        (_lprmsmlm, "ccsc", "LRSL", False),
        (_lprmsmrm, "ccsc", "LRSR", False),
        (_lprmsmlm, "ccsc", "LRSL", True),
        (_lprmsmrm, "ccsc", "LRSR", True),
        (_lprmslmrp, "ccscc", "LRSLR", False),
    ]
    swap = str.maketrans("LR", "RL")
    words = []
    for family, shape, letters, backwards in groups:
        for tr in _TRANSFORMS:
            word = letters.translate(swap) if tr in ("reflect", "both") else letters
            if backwards:
                word = word[::-1]
            words.append(_Word(family, shape, word, tr, backwards))
    return tuple(words)


WORDS = _make_words()


def relative_pose(a, b, radius):
    """Pose of ``b`` in the frame of ``a``, scaled to unit turning radius."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dx = b[..., 0] - a[..., 0]
    dy = b[..., 1] - a[..., 1]
    c, s = np.cos(a[..., 2]), np.sin(a[..., 2])
    x = (c * dx + s * dy) / radius
    y = (-s * dx + c * dy) / radius
    phi = wrap_angle(b[..., 2] - a[..., 2])
    return x, y, phi


def _best(x, y, phi):
    """Shortest word per element: (length, word index, t, u, v)."""
    best = np.full(x.shape, np.inf)
    idx = np.full(x.shape, -1, dtype=np.int64)
    bt = np.zeros(x.shape)
    bu = np.zeros(x.shape)
    bv = np.zeros(x.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        for k, w in enumerate(WORDS):
            ok, t, u, v = w.family(*w.inputs(x, y, phi))
            total = np.where(ok, w.total(t, u, v), np.inf)
            better = total < best
            best = np.where(better, total, best)
            idx = np.where(better, k, idx)
            bt = np.where(better, t, bt)
            bu = np.where(better, u, bu)
            bv = np.where(better, v, bv)
    return best, idx, bt, bu, bv


def rs_lengths(a, b, radius: float = 1.0) -> np.ndarray:
    """Shortest path lengths between broadcast arrays of SE(2) states."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a, b = np.broadcast_arrays(a, b)
    shape = a.shape[:-1]
    a = a.reshape(-1, 3)
    b = b.reshape(-1, 3)
    out = np.empty(a.shape[0])
    for lo in range(0, a.shape[0], _CHUNK):
        x, y, phi = relative_pose(a[lo:lo + _CHUNK], b[lo:lo + _CHUNK], radius)
        out[lo:lo + _CHUNK] = _best(x, y, phi)[0] * radius
    return out.reshape(shape)


@dataclass(frozen=True, eq=False)
class RSPath(Trajectory):
    """Reeds-Shepp path: ``letters[i]`` in {L, R, S} with signed ``lengths[i]``
    in distance units (negative means reverse gear)."""

    letters: str = ""
    lengths: tuple = ()
    radius: float = 1.0

    def sample(self, resolution: float) -> np.ndarray:
        states, _ = sample_paths([self], resolution)
        return states

    def translated(self, offset) -> "RSPath":
        return RSPath(
            start=shift_state(self.start, offset),
            end=shift_state(self.end, offset),
            cost=self.cost,
            duration=self.duration,
            letters=self.letters,
            lengths=self.lengths,
            radius=self.radius,
        )

    def state_at(self, s: float) -> np.ndarray:
        """Pose after travelling arc length ``s`` (clamped to the path)."""
        pose = np.array(self.start, dtype=np.float64)
        remaining = min(max(s, 0.0), self.duration)
        for letter, length in zip(self.letters, self.lengths):
            if remaining <= 0:
                break
            step = math.copysign(min(abs(length), remaining), length)
            pose = _advance(pose[None, :], np.array([_STEER[letter]]), np.array([step]), self.radius)[0]
            remaining -= abs(step)
        pose[2] = float(wrap_angle(pose[2]))
        return pose


def _advance(pose, steer, dist, radius):
    """Move poses by signed distance ``dist`` with steering -1/0/+1."""
    x, y, th = pose[:, 0], pose[:, 1], pose[:, 2]
    ang = dist / radius
    sgn = np.where(steer == 0, 1.0, steer.astype(float))
    th2 = th + sgn * ang
    arc = steer != 0
    nx = np.where(arc, x + sgn * radius * (np.sin(th2) - np.sin(th)), x + dist * np.cos(th))
    ny = np.where(arc, y + sgn * radius * (np.cos(th) - np.cos(th2)), y + dist * np.sin(th))
    nth = np.where(arc, th2, th)
    return np.stack([nx, ny, nth], axis=1)


def sample_paths(paths, resolution: float):
    """Sample many RS paths at once.

    Returns ``(states, owner)`` where ``owner[i]`` is the index of the path
    that produced ``states[i]``.  Consecutive samples of a path are at most
    ``resolution`` apart in arc length and both endpoints are included.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    n = len(paths)
    if n == 0:
        return np.zeros((0, 3)), np.zeros(0, dtype=np.int64)
    radius = paths[0].radius
    starts = np.array([p.start for p in paths], dtype=np.float64)
    steer = np.zeros((n, 5), dtype=np.int64)
    lens = np.zeros((n, 5))
    for i, p in enumerate(paths):
        for k, (letter, length) in enumerate(zip(p.letters, p.lengths)):
            steer[i, k] = _STEER[letter]
            lens[i, k] = length
    return _sample_arrays(starts, steer, lens, radius, resolution)


def _sample_arrays(starts, steer, lens, radius, resolution):
    n = starts.shape[0]
    absl = np.abs(lens)
    total = absl.sum(axis=1)
    intervals = np.where(total > 0, np.maximum(1, np.ceil(total / resolution)), 0).astype(np.int64)
    counts = intervals + 1
    owner = np.repeat(np.arange(n), counts)
    first = np.concatenate([[0], np.cumsum(counts)[:-1]])
    j = np.arange(owner.size) - first[owner]
    denom = np.maximum(intervals[owner], 1)
    s = total[owner] * j / denom

    # segment start poses
    seg_start = np.zeros((n, 6, 3))
    seg_start[:, 0] = starts
    for k in range(5):
        seg_start[:, k + 1] = _advance(seg_start[:, k], steer[:, k], lens[:, k], radius)
    cum = np.concatenate([np.zeros((n, 1)), np.cumsum(absl, axis=1)], axis=1)
    k = (s[:, None] > cum[owner, 1:5]).sum(axis=1)
    local = s - cum[owner, k]
    local = np.minimum(local, absl[owner, k])
    signed = np.copysign(local, lens[owner, k])
    states = _advance(seg_start[owner, k], steer[owner, k], signed, radius)
    states[:, 2] = wrap_angle(states[:, 2])
    return states, owner


class ReedsShepp:
    """Kinematic car with minimum turning radius; cost is path length."""

    name = "reeds_shepp"
    dim = 3
    spatial_dims = (0, 1)
    symmetric = True

    def __init__(self, turning_radius: float = 1.0):
        if not turning_radius > 0:
            raise ValueError("turning_radius must be positive")
        self.turning_radius = float(turning_radius)

    def __repr__(self):
        return f"ReedsShepp(turning_radius={self.turning_radius!r})"

    def params(self) -> dict:
        return {"turning_radius": self.turning_radius}

    def zero_state(self) -> np.ndarray:
        return as_state([0.0, 0.0, 0.0], 3)

    def state(self, x) -> np.ndarray:
        s = np.array(x, dtype=np.float64).reshape(-1)
        if s.shape == (3,):
            s[2] = wrap_angle(s[2])
        return as_state(s, 3)

    def costs(self, a, b) -> np.ndarray:
        return rs_lengths(a, b, self.turning_radius)

    def cost(self, a, b) -> float:
        return float(self.costs(np.asarray(a)[None], np.asarray(b)[None])[0])

    def cost_lower_bound(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        return np.hypot(b[..., 0] - a[..., 0], b[..., 1] - a[..., 1])

    def heuristic_costs(self, a, b) -> np.ndarray:
        return self.costs(a, b)

    def steer(self, a, b) -> RSPath:
        return self.steer_many(np.asarray(a)[None], np.asarray(b)[None])[0]

    def steer_many(self, a, b) -> list:
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        b = np.atleast_2d(np.asarray(b, dtype=np.float64))
        a, b = np.broadcast_arrays(a, b)
        r = self.turning_radius
        out = []
        for lo in range(0, a.shape[0], _CHUNK):
            ca, cb = a[lo:lo + _CHUNK], b[lo:lo + _CHUNK]
            x, y, phi = relative_pose(ca, cb, r)
            best, idx, t, u, v = _best(x, y, phi)
            for i in range(ca.shape[0]):
                start = self.state(ca[i])
                end = self.state(cb[i])
                if np.array_equal(start, end):
                    out.append(RSPath(start, end, 0.0, 0.0, "", (), r))
                    continue
                cost = float(best[i] * r)
                w = WORDS[idx[i]]
                segs = w.lengths(t[i], u[i], v[i])
                letters, lengths = [], []
                for letter, seg in zip(w.letters, segs):
                    if abs(seg) > 1e-12:
                        letters.append(letter)
                        lengths.append(float(seg) * r)
                out.append(RSPath(start, end, cost, cost, "".join(letters), tuple(lengths), r))
        return out

    def sample_many(self, trajectories, resolution: float):
        return sample_paths(trajectories, resolution)
