"""Feedback graphs induced by a group acting on a delta-net.

Two vertices are adjacent in ``G_eps`` when some group element carries one
strictly within ``eps`` of the other.  The neighbourhood of an orbit uses a
non-strict bound.  Both comparisons are made without extra tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .geometry import DeltaNet, pairwise_distances
from .group_action import DirichletDomain, FiniteGroup, canonicalize_many


class GraphConsistencyError(RuntimeError):
    pass


def orbit_distances(group: FiniteGroup, net: DeltaNet, x) -> np.ndarray:
    """Distance from every vertex to the nearest image of ``x``."""
    return pairwise_distances(group.images(x), net.vertices).min(axis=0)


def neighborhood_of_orbit(group: FiniteGroup, net: DeltaNet, x, eps: float) -> np.ndarray:
    """Ascending vertex indices within ``eps`` of some image of ``x`` (brute force)."""
    return np.flatnonzero(orbit_distances(group, net, x) <= eps)


def orbit_distance_matrix(group: FiniteGroup, net: DeltaNet) -> np.ndarray:
    """``M[u, v] = min_g D(g.u, v)`` over all vertex pairs."""
    verts = net.vertices
    out = np.full((len(verts), len(verts)), np.inf)
    imgs = group.images_many(verts)  # (|G|, |V|, d)
    for g in range(group.order):
        np.minimum(out, pairwise_distances(imgs[g], verts), out=out)
    return out


@dataclass(frozen=True, eq=False)
class OrbitGraph:
    epsilon: float
    adjacency: np.ndarray
    net: DeltaNet

    @property
    def vertex_count(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, u: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[u])

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges ``u < v`` (self-loops omitted)."""
        iu, iv = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(iu.tolist(), iv.tolist()))

    def is_clique(self, members) -> bool:
        idx = np.asarray(members, dtype=int)
        return bool(self.adjacency[np.ix_(idx, idx)].all())


def build_graph(net: DeltaNet, group: FiniteGroup, eps: float, dist: np.ndarray | None = None) -> OrbitGraph:
    """Orbit graph at scale ``eps``; reuse ``dist`` from :func:`orbit_distance_matrix` if given."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if dist is None:
        dist = orbit_distance_matrix(group, net)
    adj = dist < eps
    asym = adj != adj.T
    if asym.any():
        # disagreement is only tolerated at rounding level next to the threshold
        gap = np.abs(dist - dist.T)[asym].max()
        if gap > 1e-9:
            raise GraphConsistencyError(f"orbit distances are not symmetric (gap {gap:.3g}); group is not isometric")
        adj = adj | adj.T
    adj.setflags(write=False)
    return OrbitGraph(float(eps), adj, net)


def vertices_covering_closure(
    net: DeltaNet, group: FiniteGroup, dom: DirichletDomain, rng=None, samples: int | None = None
) -> np.ndarray:
    """Greedy subset of vertices whose delta-balls cover sampled points of the closed domain.

    Classic greedy set cover: repeatedly keep the vertex that covers the most
    still-uncovered samples (lowest index on ties).
    """
    rng = np.random.default_rng(rng)
    m = samples if samples is not None else 100 * len(net)
    pts = net.space.sample(rng, m)
    _, pts = canonicalize_many(group, dom, pts)
    tree = cKDTree(pts)
    balls = tree.query_ball_point(net.vertices, r=net.delta)
    rows = np.repeat(np.arange(len(net)), [len(b) for b in balls])
    cols = np.concatenate([np.asarray(b, dtype=int) for b in balls]) if rows.size else np.empty(0, int)
    cover = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(len(net), m))
    uncovered = np.ones(m)
    chosen: list[int] = []
    while True:
        gain = cover @ uncovered
        best = int(gain.argmax())
        if gain[best] <= 0:
            break
        chosen.append(best)
        uncovered[cover[best].indices] = 0.0
    if not chosen:
        raise GraphConsistencyError("empty covering of the fundamental domain")
    return np.array(sorted(chosen), dtype=int)


@dataclass(frozen=True)
class CliqueCover:
    cliques: list[list[int]]
    owner: np.ndarray

    def __len__(self) -> int:
        return len(self.cliques)


def check_partition(cover: CliqueCover, n_vertices: int) -> bool:
    seen = np.zeros(n_vertices, dtype=int)
    for c in cover.cliques:
        seen[np.asarray(c, dtype=int)] += 1
    return bool((seen == 1).all())


def clique_cover(
    net: DeltaNet,
    group: FiniteGroup,
    dom: DirichletDomain,
    delta: float | None = None,
    graph: OrbitGraph | None = None,
    domain_vertices: np.ndarray | None = None,
    rng=None,
) -> CliqueCover:
    """Partition the vertices into cliques of ``G_{2 delta}`` seeded from the domain cover."""
    delta = net.delta if delta is None else delta
    if graph is None:
        graph = build_graph(net, group, 2 * delta)
    elif not np.isclose(graph.epsilon, 2 * delta):
        raise ValueError(f"graph built at eps={graph.epsilon}, need {2 * delta}")
    if domain_vertices is None:
        domain_vertices = vertices_covering_closure(net, group, dom, rng=rng)
    n = len(net)
    owner = np.full(n, -1, dtype=int)
    cliques: list[list[int]] = []
    for i in domain_vertices:
        cand = neighborhood_of_orbit(group, net, net.vertices[i], delta)
        cand = cand[owner[cand] < 0]
        if cand.size:
            owner[cand] = len(cliques)
            cliques.append(cand.tolist())
    for v in np.flatnonzero(owner < 0):
        owner[v] = len(cliques)
        cliques.append([int(v)])
    for k, c in enumerate(cliques):
        if not graph.is_clique(c):
            raise GraphConsistencyError(f"clique {k} = {c} is not complete in G_2delta")
    owner.setflags(write=False)
    return CliqueCover(cliques, owner)
