"""Occupancy grids with PGM (P5) + JSON sidecar I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MapFileError(Exception):
    pass


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """``occupied[iy, ix]``; cell (0, 0) has its lower-left corner at ``origin``.

    Positions outside the grid are free.
    """

    occupied: np.ndarray
    resolution: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        occ = np.array(self.occupied, dtype=bool)
        if occ.ndim != 2:
            raise ValueError("occupancy array must be 2-D")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        occ.flags.writeable = False
        object.__setattr__(self, "occupied", occ)
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @classmethod
    def empty(cls, width: int, height: int, resolution: float, origin=(0.0, 0.0)) -> "OccupancyGrid":
        return cls(np.zeros((height, width), dtype=bool), resolution, origin)

    @property
    def width(self) -> int:
        return int(self.occupied.shape[1])

    @property
    def height(self) -> int:
        return int(self.occupied.shape[0])

    @property
    def extent(self) -> tuple:
        """(xmin, xmax, ymin, ymax) in world units."""
        x0, y0 = self.origin
        return (x0, x0 + self.width * self.resolution, y0, y0 + self.height * self.resolution)

    def cells_of(self, xy) -> tuple:
        xy = np.atleast_2d(np.asarray(xy, dtype=np.float64))
        ix = np.floor((xy[:, 0] - self.origin[0]) / self.resolution).astype(np.int64)
        iy = np.floor((xy[:, 1] - self.origin[1]) / self.resolution).astype(np.int64)
        return ix, iy

    def occupied_at(self, xy) -> np.ndarray:
        ix, iy = self.cells_of(xy)
        inside = (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)
        out = np.zeros(ix.shape, dtype=bool)
        out[inside] = self.occupied[iy[inside], ix[inside]]
        return out

    def is_free(self, xy) -> bool:
        return not bool(self.occupied_at(xy).any())

    def cell_center(self, ix, iy) -> np.ndarray:
        return np.array([self.origin[0] + (ix + 0.5) * self.resolution, self.origin[1] + (iy + 0.5) * self.resolution])

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.origin == other.origin
            and np.array_equal(self.occupied, other.occupied)
        )

    __hash__ = None


def save_pgm(grid: OccupancyGrid, path, occupied_threshold: float = 0.65) -> None:
    """Write a P5 image (occupied = 0, free = 254) plus a JSON sidecar."""
    path = Path(path)
    img = np.where(grid.occupied, 0, 254).astype(np.uint8)[::-1]
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    path.write_bytes(header + img.tobytes())
    meta = {"resolution": grid.resolution, "origin": list(grid.origin), "occupied_threshold": occupied_threshold}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")


def _pgm_tokens(buf: bytes):
    """Yield (token, end offset) for the four header fields, skipping comments."""
    pos = 0
    found = []
    while len(found) < 4:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MapFileError("truncated PGM header")
        found.append(buf[start:pos])
    return found, pos + 1


def load_pgm(path) -> OccupancyGrid:
    path = Path(path)
    try:
        buf = path.read_bytes()
        meta = json.loads(path.with_suffix(".json").read_text())
    except FileNotFoundError as exc:
        raise MapFileError(f"missing map file: {exc.filename}") from exc
    except json.JSONDecodeError as exc:
        raise MapFileError(f"bad map sidecar: {exc}") from exc
    (magic, w, h, maxval), off = _pgm_tokens(buf)
    if magic != b"P5":
        raise MapFileError(f"expected binary PGM (P5), found {magic!r}")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise MapFileError(f"bad PGM header: {exc}") from exc
    if maxval > 255:
        raise MapFileError("16-bit PGM not supported")
    data = np.frombuffer(buf, dtype=np.uint8, count=w * h, offset=off) if len(buf) - off >= w * h else None
    if data is None:
        raise MapFileError("PGM pixel data truncated")
    try:
        thresh = float(meta.get("occupied_threshold", 0.65))
        res = float(meta["resolution"])
        origin = tuple(float(v) for v in meta.get("origin", (0.0, 0.0)))[:2]
    except (KeyError, TypeError, ValueError) as exc:
        raise MapFileError(f"bad map sidecar: {exc}") from exc
    prob = (maxval - data.reshape(h, w).astype(np.float64)) / maxval
    return OccupancyGrid((prob > thresh)[::-1], res, origin)
