"""Tree of coverings over the arm box for approximate orbit-neighbourhood queries.

Every level halves each axis of its parent cell, so a cell at depth ``h`` has
diameter ``diam(X) * 0.5**h`` (``c = diam(X)``, ``rho = 0.5``).  Splitting stops
at the first depth ``H`` with ``rho**H < 2*delta``.  Only non-empty cells are
stored.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ArmSpace, DeltaNet
from .group_action import FiniteGroup


@dataclass(eq=False)
class CoverTree:
    space: ArmSpace
    net: DeltaNet
    rho: float
    c: float
    depth: int
    # per level: cell integer coordinates -> vertex indices in that cell
    levels: list[dict[tuple, np.ndarray]] = field(repr=False)
    visits: int = 0

    def diameter(self, h: int) -> float:
        return self.c * self.rho ** h

    def cell_bounds(self, h: int, key: tuple) -> tuple[np.ndarray, np.ndarray]:
        size = self.space.widths * self.rho ** h
        lo = self.space.lower + np.asarray(key) * size
        return lo, lo + size

    def query_depth(self, radius: float) -> int:
        """First depth whose cells have diameter at most ``2*radius`` (capped at the leaves)."""
        for h in range(self.depth + 1):
            if self.diameter(h) <= 2 * radius:
                return h
        return self.depth

    def slack(self, radius: float) -> float:
        return self.diameter(self.query_depth(radius))

    def children(self, h: int, key: tuple):
        nxt = self.levels[h + 1]
        for bits in itertools.product((0, 1), repeat=self.space.dim):
            child = tuple(2 * k + b for k, b in zip(key, bits))
            if child in nxt:
                yield child


def build_tree(space: ArmSpace, net: DeltaNet, rho: float = 0.5) -> CoverTree:
    if rho != 0.5:
        raise ValueError("only rho = 0.5 (halving every axis) is implemented")
    depth = 0
    while rho ** depth >= 2 * net.delta:
        depth += 1
    rel = (net.vertices - space.lower) / space.widths
    levels = []
    for h in range(depth + 1):
        n_cells = 2 ** h
        idx = np.clip(np.floor(rel * n_cells).astype(int), 0, n_cells - 1)
        cells: dict[tuple, list[int]] = {}
        for v, key in enumerate(map(tuple, idx.tolist())):
            cells.setdefault(key, []).append(v)
        levels.append({k: np.array(v, dtype=int) for k, v in cells.items()})
    return CoverTree(space, net, rho, space.diameter, depth, levels)


def _box_ball_distance(lo: np.ndarray, hi: np.ndarray, z: np.ndarray) -> float:
    gap = np.maximum(np.maximum(lo - z, z - hi), 0.0)
    return math.sqrt(float(gap @ gap))


def locate(tree: CoverTree, z, radius: float) -> np.ndarray:
    """Vertices of the depth-``H'`` cells meeting the closed ball ``B(z, radius)``."""
    z = np.asarray(z, dtype=float)
    target = tree.query_depth(radius)
    frontier = [k for k in tree.levels[0]]
    for h in range(target + 1):
        kept = []
        for key in frontier:
            tree.visits += 1
            lo, hi = tree.cell_bounds(h, key)
            if _box_ball_distance(lo, hi, z) <= radius:
                kept.append(key)
        if h == target:
            frontier = kept
            break
        frontier = [c for key in kept for c in tree.children(h, key)]
    if not frontier:
        return np.empty(0, dtype=int)
    cells = tree.levels[target]
    return np.unique(np.concatenate([cells[k] for k in frontier]))


def approx_neighborhood(tree: CoverTree, group: FiniteGroup, x, eps: float) -> np.ndarray:
    """Union of :func:`locate` over the orbit of ``x``.

    Contains every vertex within ``eps`` of the orbit and nothing farther than
    ``eps + tree.slack(eps)``.
    """
    parts = [locate(tree, z, eps) for z in group.images(x)]
    return np.unique(np.concatenate(parts)) if parts else np.empty(0, dtype=int)
