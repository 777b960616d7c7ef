"""Render taxonomy trees and distance matrices to PNG files.

Layout is computed here, not delegated to an external DOT renderer, so the
pipeline can always produce a figure next to its delimited outputs. Nodes are
placed on rings by distance from the tree center, each subtree getting an
angular wedge proportional to its leaf count; all iteration orders are
sorted, so the layout is a pure function of the tree.

Figures use the same sector palette as the DOT export. They are a reporting
convenience: the delimited artifacts stay the canonical, byte-deterministic
outputs.
"""
from __future__ import annotations

import math

from matplotlib.figure import Figure
from matplotlib.patches import Patch

from .graph import TaxonomyTree, color_for_sector
from .metrics import DistanceMatrix


def _tree_center(adj: dict[str, list[str]]) -> str:
    """Peel leaf layers until at most two nodes remain; ties break by name."""
    deg = {s: len(nbrs) for s, nbrs in adj.items()}
    alive = set(adj)
    leaves = sorted(s for s in alive if deg[s] <= 1)
    while len(alive) > 2:
        fresh = []
        for leaf in leaves:
            alive.discard(leaf)
            for nb in adj[leaf]:
                if nb in alive:
                    deg[nb] -= 1
                    if deg[nb] == 1:
                        fresh.append(nb)
        leaves = sorted(fresh)
    return min(alive)


def radial_layout(tree: TaxonomyTree) -> dict[str, tuple[float, float]]:
    """Deterministic radial positions keyed by symbol."""
    adj = {s: sorted(nbrs) for s, nbrs in tree.adjacency().items()}
    root = _tree_center(adj)
    parent: dict[str, str | None] = {root: None}
    depth = {root: 0}
    order = [root]
    stack = [root]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in parent:
                parent[v] = u
                depth[v] = depth[u] + 1
                order.append(v)
                stack.append(v)
    children: dict[str, list[str]] = {u: [] for u in adj}
    for v, p in parent.items():
        if p is not None:
            children[p].append(v)
    leaves = {u: 1 for u in adj}
    for u in reversed(order):  # post-order accumulation
        if children[u]:
            leaves[u] = sum(leaves[c] for c in children[u])
    pos = {root: (0.0, 0.0)}
    wedges = [(root, 0.0, 2.0 * math.pi)]
    while wedges:
        u, lo, hi = wedges.pop()
        cursor = lo
        for c in children[u]:
            width = (hi - lo) * leaves[c] / leaves[u]
            angle = cursor + width / 2.0
            pos[c] = (depth[c] * math.cos(angle), depth[c] * math.sin(angle))
            wedges.append((c, cursor, cursor + width))
            cursor += width
    return pos


def render_tree(tree: TaxonomyTree, path, title: str = "") -> None:
    """Draw the tree with sector-colored nodes and a sector legend."""
    pos = radial_layout(tree)
    n = len(tree.nodes)
    side = min(16.0, max(6.0, 1.2 * math.sqrt(n) + 3.0))
    fig = Figure(figsize=(side, side))
    ax = fig.add_subplot()
    for a, b, _ in tree.edges:
        (xa, ya), (xb, yb) = pos[a], pos[b]
        ax.plot([xa, xb], [ya, yb], color="0.6", linewidth=1.0, zorder=1)
    sectors_present = sorted({sector for _, sector, _ in tree.nodes})
    for sym, sector, _ in tree.nodes:
        x, y = pos[sym]
        ax.scatter([x], [y], s=240, color=color_for_sector(sector),
                   edgecolors="black", linewidths=0.8, zorder=2)
        ax.annotate(sym, (x, y), ha="center", va="center", fontsize=7, zorder=3)
    handles = [
        Patch(facecolor=color_for_sector(s), edgecolor="black", label=s)
        for s in sectors_present
    ]
    ax.legend(handles=handles, loc="upper right", fontsize=8, framealpha=0.9)
    if title:
        ax.set_title(title)
    ax.set_aspect("equal")
    ax.axis("off")
    # explicit format so file-like targets work
    fig.savefig(path, dpi=120, bbox_inches="tight", format="png")


def render_matrix(matrix: DistanceMatrix, path, title: str = "") -> None:
    """Heatmap of the distance matrix with symbols on both axes."""
    n = matrix.n
    side = min(16.0, max(5.0, 0.3 * n + 3.0))
    fig = Figure(figsize=(side, side))
    ax = fig.add_subplot()
    vmax = 2.0 if matrix.kind == "correlation" else 1.0
    im = ax.imshow(matrix.values, cmap="viridis", vmin=0.0, vmax=vmax)
    show_labels = n <= 40
    if show_labels:
        ax.set_xticks(range(n), matrix.symbols, rotation=90, fontsize=6)
        ax.set_yticks(range(n), matrix.symbols, fontsize=6)
    fig.colorbar(im, ax=ax, shrink=0.8, label=f"{matrix.kind} distance")
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=120, bbox_inches="tight", format="png")
