"""SVG figures: planning overlays, tiled primitive graphs, sweep summaries.

Every drawn element carries a ``gid`` so figures can be checked by counting
elements in the SVG.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SVG_RC = {"svg.hashsalt": "mindisp", "svg.fonttype": "none"}


def _save(fig, path):
    with plt.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _draw_grid(ax, grid):
    x0, x1, y0, y1 = grid.extent
    im = ax.imshow(grid.occupied, origin="lower", extent=(x0, x1, y0, y1), cmap="Greys", vmin=0, vmax=1.4,
                   interpolation="nearest")
    im.set_gid("occupancy")


def plot_plan(grid, result, system, path, resolution=None):
    """Map, one marker per expanded node, one curve per stitched trajectory."""
    fig, ax = plt.subplots(figsize=(6, 6))
    _draw_grid(ax, grid)
    if result.generated_states:
        g = np.array(result.generated_states)
        sc = ax.scatter(g[:, 0], g[:, 1], s=3, c="0.6", linewidths=0)
        sc.set_gid("open")
    if result.expanded_states:
        e = np.array(result.expanded_states)
        sc = ax.scatter(e[:, 0], e[:, 1], s=6, c="tab:blue", linewidths=0)
        sc.set_gid("expanded")
    res = resolution or result.collision_resolution
    for i, t in enumerate(result.stitched):
        states, _ = system.sample_many([t], res)
        (ln,) = ax.plot(states[:, 0], states[:, 1], color="tab:red", lw=1.5)
        ln.set_gid(f"traj-{i}")
    ax.set_aspect("equal")
    ax.set_title(f"{result.status}  cost={result.total_cost:.4g}  checks={result.collision_checks}")
    _save(fig, path)


def plot_graph(graph, path, resolution=None, tiles: int = 1):
    """Vertices (tile 0), their out-edges, and tiled copies of the vertex set."""
    system = graph.system
    res = resolution or graph.dispersion / 10.0
    fig, ax = plt.subplots(figsize=(6, 6))
    states, owner = system.sample_many(graph.trajectories, res)
    bounds = np.searchsorted(owner, np.arange(graph.n_edges + 1))
    for e in range(graph.n_edges):
        seg = states[bounds[e]:bounds[e + 1]]
        (ln,) = ax.plot(seg[:, 0], seg[:, 1], color="0.75", lw=0.5)
        ln.set_gid(f"edge-{e}")
    if graph.tiling.k == 2 and tiles > 0:
        offs = graph.tiling.offsets(tiles)
        offs = offs[np.any(offs != 0, axis=1)]
        shift = offs * np.asarray(graph.tiling.tile_extent)
        pts = (graph.vertices[None, :, :2] + shift[:, None, :]).reshape(-1, 2)
        sc = ax.scatter(pts[:, 0], pts[:, 1], s=8, c="tab:blue", linewidths=0)
        sc.set_gid("tiled-vertices")
        w, h = graph.tiling.tile_extent
        for ox in range(-tiles, tiles + 2):
            ax.axvline(ox * w, color="0.5", ls=":", lw=0.5)
        for oy in range(-tiles, tiles + 2):
            ax.axhline(oy * h, color="0.5", ls=":", lw=0.5)
    sc = ax.scatter(graph.vertices[:, 0], graph.vertices[:, 1], s=14, c="tab:green", linewidths=0, zorder=3)
    sc.set_gid("vertices")
    ax.set_aspect("equal")
    ax.set_title(f"|V|={graph.n_vertices}  |E|={graph.n_edges}  d={graph.dispersion:.4g}")
    _save(fig, path)


def plot_sweep(aggregates, path):
    """Mean collision checks and mean cost per method (graphs by dispersion)."""
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
    labels = [a["method_id"] for a in aggregates]
    x = np.arange(len(labels))
    checks = [a["mean_collision_checks"] or 0.0 for a in aggregates]
    costs = [a["mean_cost"] if a["mean_cost"] is not None else np.nan for a in aggregates]
    for i, patch in enumerate(a1.bar(x, checks, color="tab:blue")):
        patch.set_gid(f"checks-{i}")
    a1.set_ylabel("mean collision checks")
    for i, patch in enumerate(a2.bar(x, costs, color="tab:orange")):
        patch.set_gid(f"costs-{i}")
    a2.set_ylabel("mean cost (successful maps)")
    for ax in (a1, a2):
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    fig.tight_layout()
    _save(fig, path)
