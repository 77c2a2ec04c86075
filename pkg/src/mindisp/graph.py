"""Motion-primitive graph: edge construction, implicit tiled expansion, file I/O."""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dispersion import DispersionRun, TilingSpec, tile_points
from .systems import make_system, system_kind
from .systems.base import as_state
from .systems.double_integrator import DIPath
from .systems.reeds_shepp import RSPath

FORMAT_VERSION = 1
MAGIC = b"MDPGRAPH"
_LETTER_CODE = {"L": 0, "R": 1, "S": 2}
_CODE_LETTER = {v: k for k, v in _LETTER_CODE.items()}
_KIND_CODE = {"reeds_shepp": 1, "double_integrator": 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


class GraphFileError(Exception):
    pass


class MalformedGraphError(GraphFileError):
    pass


class FormatVersionError(GraphFileError):
    def __init__(self, found, expected=FORMAT_VERSION):
        super().__init__(f"graph file format_version {found} is not supported (this build reads {expected})")
        self.found = found
        self.expected = expected


class ChecksumError(GraphFileError):
    pass


@dataclass(eq=False)
class PrimitiveGraph:
    """Vertices live in one tile whose reference corner is the origin; an edge
    ``(src, dst, offset)`` goes from vertex ``src`` in tile 0 to vertex ``dst``
    in tile ``offset``."""

    system: object
    vertices: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_offset: np.ndarray
    edge_cost: np.ndarray
    trajectories: list
    dispersion: float
    tiling: TilingSpec
    history: tuple = ()
    format_version: int = FORMAT_VERSION
    _sample_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n = self.vertices.shape[0]
        order = np.argsort(self.edge_src, kind="stable")
        if np.any(order != np.arange(order.size)):
            raise ValueError("edges must be grouped by source vertex")
        self.out_start = np.searchsorted(self.edge_src, np.arange(n + 1))

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edge_src.size)

    def out_degree(self, i: int) -> int:
        return int(self.out_start[i + 1] - self.out_start[i])

    @property
    def mean_out_degree(self) -> float:
        return self.n_edges / max(1, self.n_vertices)

    def out_edges(self, i: int) -> range:
        return range(int(self.out_start[i]), int(self.out_start[i + 1]))

    def tile_shift(self, tile) -> np.ndarray:
        """Planar translation of an integer tile coordinate."""
        if self.tiling.k == 0:
            return np.zeros(len(self.system.spatial_dims))
        return np.asarray(tile, dtype=np.float64) * np.asarray(self.tiling.tile_extent)

    def world_state(self, vertex: int, tile) -> np.ndarray:
        s = np.array(self.vertices[vertex], dtype=np.float64)
        shift = self.tile_shift(tile)
        for j, d in enumerate(self.tiling.spatial_dims):
            s[d] += shift[j]
        return s

    def tile_of(self, state) -> tuple:
        """Integer tile coordinate containing a world state."""
        s = np.asarray(state, dtype=np.float64)
        return tuple(
            int(np.floor(s[d] / self.tiling.tile_extent[j])) for j, d in enumerate(self.tiling.spatial_dims)
        )

    def expand(self, node):
        """Successors of ``(vertex, tile)`` with world-frame trajectories."""
        v, tile = node
        if not 0 <= v < self.n_vertices:
            raise IndexError(f"vertex index {v} out of range [0, {self.n_vertices})")
        tile = np.asarray(tile, dtype=np.int64)
        shift = self.tile_shift(tile)
        out = []
        for e in self.out_edges(v):
            succ = (int(self.edge_dst[e]), tuple(int(c) for c in tile + self.edge_offset[e]))
            out.append((succ, float(self.edge_cost[e]), self.trajectories[e].translated(shift)))
        return out

    def edge_samples(self, resolution: float):
        """Local-frame sampled positions per edge, cached by resolution."""
        key = float(resolution)
        if key not in self._sample_cache:
            states, owner = self.system.sample_many(self.trajectories, resolution)
            pos = states[:, list(self.tiling.spatial_dims) or [0, 1]]
            bounds = np.searchsorted(owner, np.arange(self.n_edges + 1))
            self._sample_cache[key] = [pos[bounds[e]:bounds[e + 1]] for e in range(self.n_edges)]
        return self._sample_cache[key]

    def summary(self) -> dict:
        return {
            "system": system_kind(self.system),
            "params": self.system.params(),
            "vertices": self.n_vertices,
            "edges": self.n_edges,
            "dispersion": self.dispersion,
            "mean_out_degree": self.mean_out_degree,
            "tiling": {
                "spatial_dims": list(self.tiling.spatial_dims),
                "tile_extent": list(self.tiling.tile_extent),
                "neighbor_radius": self.tiling.neighbor_radius,
            },
        }


def normalized_vertices(run: DispersionRun) -> np.ndarray:
    """Shift vertices so the dense box's lower spatial corner is the origin."""
    V = np.array(run.vertices, dtype=np.float64)
    for d in run.tiling.spatial_dims:
        V[:, d] -= run.dense.box.lower[d]
    return V


def build_edges(run: DispersionRun, system, normalize: bool = True) -> PrimitiveGraph:
    """Directed edges for every (vertex, tiled vertex) pair with 0 < J < 2d."""
    d = float(run.final_dispersion)
    if not np.isfinite(d):
        raise ValueError("run has no finite dispersion")
    V = normalized_vertices(run) if normalize else np.array(run.vertices, dtype=np.float64)
    tiling = run.tiling
    tiled = tile_points(V, tiling)
    n = V.shape[0]
    src, dst, offs, costs, trajs = [], [], [], [], []
    for i in range(n):
        c = system.costs(V[i][None, :], tiled.states)
        zero_off = np.all(tiled.offsets == 0, axis=1)
        keep = (c > 0) & (c < 2.0 * d) & ~((tiled.source == i) & zero_off)
        idx = np.nonzero(keep)[0]
        if idx.size == 0:
            continue
        paths = system.steer_many(np.repeat(V[i][None, :], idx.size, axis=0), tiled.states[idx])
        for k, p in zip(idx, paths):
            if not 0 < p.cost < 2.0 * d:
                continue
            src.append(i)
            dst.append(int(tiled.source[k]))
            offs.append(tiled.offsets[k])
            costs.append(p.cost)
            trajs.append(p)
    kdim = tiling.k
    return PrimitiveGraph(
        system=system,
        vertices=V,
        edge_src=np.array(src, dtype=np.int64),
        edge_dst=np.array(dst, dtype=np.int64),
        edge_offset=np.array(offs, dtype=np.int64).reshape(len(src), kdim),
        edge_cost=np.array(costs, dtype=np.float64),
        trajectories=trajs,
        dispersion=d,
        tiling=tiling,
        history=tuple(run.dispersion_history),
    )


# ---------------------------------------------------------------- file format


class _Writer:
    def __init__(self):
        self.parts = []

    def pack(self, fmt, *vals):
        self.parts.append(struct.pack("<" + fmt, *vals))

    def array(self, arr, dtype):
        self.parts.append(np.ascontiguousarray(arr, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())

    def bytes(self):
        return b"".join(self.parts)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise MalformedGraphError(f"file truncated at byte {self.pos} (needed {n} more)")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        size = struct.calcsize("<" + fmt)
        return struct.unpack("<" + fmt, self.take(size))

    def array(self, count, dtype):
        dt = np.dtype(dtype).newbyteorder("<")
        return np.frombuffer(self.take(count * dt.itemsize), dtype=dt).astype(np.dtype(dtype))


def _params_vector(system):
    kind = system_kind(system)
    if kind == "reeds_shepp":
        return [system.turning_radius, 0.0, 0.0]
    return [system.rho, system.u_max, system.v_max]


def _system_from_vector(kind, vec):
    if kind == "reeds_shepp":
        return make_system(kind, turning_radius=vec[0])
    return make_system(kind, rho=vec[0], u_max=vec[1], v_max=vec[2])


def to_bytes(graph: PrimitiveGraph) -> bytes:
    w = _Writer()
    kind = system_kind(graph.system)
    dim = graph.vertices.shape[1]
    k = graph.tiling.k
    w.parts.append(MAGIC)
    w.pack("I", FORMAT_VERSION)
    w.pack("B3d", _KIND_CODE[kind], *_params_vector(graph.system))
    w.pack("BB", dim, k)
    w.pack(f"{k}B", *graph.tiling.spatial_dims)
    w.pack(f"{k}d", *graph.tiling.tile_extent)
    w.pack("I", graph.tiling.neighbor_radius)
    w.pack("d", graph.dispersion)
    w.pack("III", graph.n_vertices, graph.n_edges, len(graph.history))
    w.array(graph.vertices, "f8")
    w.array(np.asarray(graph.history, dtype=np.float64), "f8")
    for e in range(graph.n_edges):
        t = graph.trajectories[e]
        w.pack("II", int(graph.edge_src[e]), int(graph.edge_dst[e]))
        w.pack(f"{k}i", *[int(o) for o in graph.edge_offset[e]])
        w.pack("dd", float(graph.edge_cost[e]), float(t.duration))
        w.array(t.start, "f8")
        w.array(t.end, "f8")
        if kind == "reeds_shepp":
            w.pack("B", len(t.letters))
            for letter, length in zip(t.letters, t.lengths):
                w.pack("Bd", _LETTER_CODE[letter], length)
        else:
            w.array(t.coeffs, "f8")
    body = w.bytes()
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def from_bytes(buf: bytes) -> PrimitiveGraph:
    r = _Reader(buf)
    if r.take(len(MAGIC)) != MAGIC:
        raise MalformedGraphError("not a motion-primitive graph file (bad magic)")
    (version,) = r.unpack("I")
    if version != FORMAT_VERSION:
        raise FormatVersionError(version)
    try:
        code, *pvec = r.unpack("B3d")
        if code not in _CODE_KIND:
            raise MalformedGraphError(f"unknown system code {code}")
        kind = _CODE_KIND[code]
        system = _system_from_vector(kind, pvec)
        dim, k = r.unpack("BB")
        spatial = r.unpack(f"{k}B")
        extent = r.unpack(f"{k}d")
        (radius,) = r.unpack("I")
        tiling = TilingSpec(spatial, extent, radius)
        (dispersion,) = r.unpack("d")
        nv, ne, nh = r.unpack("III")
        vertices = r.array(nv * dim, "f8").reshape(nv, dim)
        history = tuple(float(h) for h in r.array(nh, "f8"))
        src = np.empty(ne, dtype=np.int64)
        dst = np.empty(ne, dtype=np.int64)
        offs = np.empty((ne, k), dtype=np.int64)
        costs = np.empty(ne)
        trajs = []
        for e in range(ne):
            src[e], dst[e] = r.unpack("II")
            offs[e] = r.unpack(f"{k}i")
            costs[e], duration = r.unpack("dd")
            start = as_state(r.array(dim, "f8"), dim)
            end = as_state(r.array(dim, "f8"), dim)
            if kind == "reeds_shepp":
                (nseg,) = r.unpack("B")
                letters, lengths = [], []
                for _ in range(nseg):
                    lc, length = r.unpack("Bd")
                    if lc not in _CODE_LETTER:
                        raise MalformedGraphError(f"bad segment code {lc}")
                    letters.append(_CODE_LETTER[lc])
                    lengths.append(length)
                trajs.append(RSPath(start, end, float(costs[e]), duration, "".join(letters), tuple(lengths), system.turning_radius))
            else:
                coeffs = r.array(8, "f8").reshape(2, 4)
                coeffs.flags.writeable = False
                trajs.append(DIPath(start, end, float(costs[e]), duration, coeffs, system.rho))
    except (struct.error, ValueError) as exc:
        if isinstance(exc, GraphFileError):
            raise
        raise MalformedGraphError(f"corrupt graph body: {exc}") from exc
    if len(buf) - r.pos != 4:
        raise MalformedGraphError(f"unexpected trailing length {len(buf) - r.pos} (expected 4-byte checksum)")
    (stored,) = struct.unpack("<I", buf[r.pos:])
    if zlib.crc32(buf[:r.pos]) & 0xFFFFFFFF != stored:
        raise ChecksumError("graph file checksum mismatch")
    if np.any(np.diff(src) < 0) or (ne and (src.max() >= nv or dst.max() >= nv)):
        raise MalformedGraphError("edge table inconsistent with vertex count")
    vertices.flags.writeable = False
    return PrimitiveGraph(system, vertices, src, dst, offs, costs, trajs, float(dispersion), tiling, history, version)


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def save(graph: PrimitiveGraph, path, extra: dict | None = None) -> None:
    """Write the binary graph and a JSON sidecar; ``extra`` is merged into the sidecar."""
    path = Path(path)
    data = to_bytes(graph)
    path.write_bytes(data)
    meta = dict(graph.summary())
    meta.update(
        format_version=FORMAT_VERSION,
        dispersion_history=list(graph.history),
        crc32=struct.unpack("<I", data[-4:])[0],
        byte_order="little",
    )
    if extra:
        meta.update(extra)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load(path) -> PrimitiveGraph:
    return from_bytes(Path(path).read_bytes())
