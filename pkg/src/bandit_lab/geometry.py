"""Arm spaces, distances and grid delta-nets.

The arm space is an axis-aligned box.  Nets are regular grids whose cells
have half-diagonal at most ``delta``, so every point of the box lies within
``delta`` of a vertex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    """Raised for malformed points, boxes or degenerate nets."""


def as_point(x, dim: int | None = None) -> np.ndarray:
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1:
        raise GeometryError(f"a point must be a 1-d vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise GeometryError("point has non-finite coordinates")
    if dim is not None and p.shape[0] != dim:
        raise GeometryError(f"expected dimension {dim}, got {p.shape[0]}")
    return p


def distance(p, q) -> float:
    """Euclidean distance between two points of equal dimension."""
    p = as_point(p)
    q = as_point(q)
    if p.shape != q.shape:
        raise GeometryError(f"dimension mismatch: {p.shape[0]} vs {q.shape[0]}")
    return float(np.linalg.norm(p - q))


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All distances between rows of ``a`` (m, d) and rows of ``b`` (k, d)."""
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class ArmSpace:
    """Axis-aligned box ``[lower, upper]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_point(self.lower)
        hi = as_point(self.upper, lo.shape[0])
        if not np.all(lo < hi):
            raise GeometryError("box needs lower < upper on every axis")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim: int) -> "ArmSpace":
        if dim < 1:
            raise GeometryError("dimension must be >= 1")
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return (self.lower + self.upper) / 2

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    def contains(self, x, tol: float = 1e-9) -> np.ndarray | bool:
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)
        return bool(inside) if inside.ndim == 0 else inside

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.lower + rng.random((size, self.dim)) * self.widths

    def face_distance(self, x: np.ndarray) -> np.ndarray:
        """Distance from each row of ``x`` to the nearest box face."""
        x = np.atleast_2d(x)
        return np.minimum(x - self.lower, self.upper - x).min(axis=1)


@dataclass(frozen=True)
class DeltaNet:
    delta: float
    vertices: np.ndarray
    space: ArmSpace
    spacing: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.vertices.shape[0]

    @property
    def dim(self) -> int:
        return self.space.dim


def build_grid_net(space: ArmSpace, delta: float) -> DeltaNet:
    """Cell-centre grid with nominal spacing ``2*delta/sqrt(d)``.

    Each axis of width ``w`` gets ``ceil(w / s)`` evenly spaced cells, so the
    realised spacing never exceeds ``s`` and the grid is symmetric about the
    box centre.
    """
    if not (delta > 0 and math.isfinite(delta)):
        raise GeometryError(f"delta={delta} does not give a usable grid")
    d = space.dim
    s = 2 * delta / math.sqrt(d)
    counts = []
    for w in space.widths:
        ratio = w / s
        # guard against ceil(3.0000000000000004) == 4
        m = math.ceil(ratio - 1e-12 * max(1.0, ratio))
        counts.append(max(m, 1))
    axes = [
        lo + (np.arange(m) + 0.5) * (w / m)
        for lo, w, m in zip(space.lower, space.widths, counts)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    vertices = np.stack([g.ravel() for g in mesh], axis=1)
    vertices.setflags(write=False)
    spacing = space.widths / np.asarray(counts)
    spacing.setflags(write=False)
    return DeltaNet(float(delta), vertices, space, spacing)


@dataclass(frozen=True)
class CoveringReport:
    max_min_distance: float
    passed: bool
    samples: int


def covering_check(net: DeltaNet, samples: int, rng=None, tol: float = 1e-9) -> CoveringReport:
    """Monte-Carlo check that uniform points of the box lie within delta of the net."""
    rng = np.random.default_rng(rng)
    if samples <= 0:
        return CoveringReport(0.0, True, 0)
    worst = 0.0
    chunk = max(1, 2_000_000 // max(len(net), 1))
    remaining = samples
    while remaining > 0:
        k = min(chunk, remaining)
        pts = net.space.sample(rng, k)
        nearest = pairwise_distances(pts, net.vertices).min(axis=1)
        worst = max(worst, float(nearest.max()))
        remaining -= k
    return CoveringReport(worst, worst <= net.delta + tol, samples)


def proposition1_bounds(space: ArmSpace, delta: float) -> tuple[float, float]:
    """Volume bracket on covering/packing numbers at scale ``delta``."""
    if not delta > 0:
        raise GeometryError("delta must be positive")
    d = space.dim
    ratio = space.volume / unit_ball_volume(d)
    return (1 / delta) ** d * ratio, (3 / delta) ** d * ratio


def spacing_constant(d: int) -> float:
    """Factor relating grid size to the lower volume bound: ``(6/sqrt(d))**d``."""
    return (2 / math.sqrt(d) * 3) ** d
