"""Finite groups of Euclidean isometries acting on a box.

Groups are stored as explicit element lists together with their Cayley and
inverse tables.  Two maps are considered equal when they agree on ``d + 1``
affinely independent probe points.
"""
from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import ArmSpace, as_point, pairwise_distances

MAP_TOL = 1e-8
ORTHO_TOL = 1e-9


class GroupError(ValueError):
    """A list of isometries failed a group axiom or a kind/dimension check."""


class SearchError(RuntimeError):
    """Rejection sampling for a free point ran out of tries."""


class DomainError(ValueError):
    """Invalid base point or a canonicalisation that cannot land in the domain."""


@dataclass(frozen=True)
class Isometry:
    """``x -> linear @ x + translation`` with orthogonal ``linear``."""

    linear: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        a = np.array(self.linear, dtype=float, ndmin=2)
        t = np.array(self.translation, dtype=float, ndmin=1)
        if a.shape != (t.shape[0], t.shape[0]):
            raise GroupError(f"linear part {a.shape} does not match translation {t.shape}")
        a.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "linear", a)
        object.__setattr__(self, "translation", t)

    @property
    def dim(self) -> int:
        return self.translation.shape[0]

    @classmethod
    def identity(cls, d: int) -> "Isometry":
        return cls(np.eye(d), np.zeros(d))

    @classmethod
    def about(cls, linear, center) -> "Isometry":
        """Linear map acting around ``center`` instead of the origin."""
        a = np.asarray(linear, dtype=float)
        c = np.asarray(center, dtype=float)
        return cls(a, c - a @ c)

    def __call__(self, x) -> np.ndarray:
        return apply(self, x)

    def compose(self, other: "Isometry") -> "Isometry":
        """``self o other``: apply ``other`` first."""
        return Isometry(self.linear @ other.linear, self.linear @ other.translation + self.translation)

    def orthogonality_defect(self) -> float:
        a = self.linear
        return float(np.abs(a.T @ a - np.eye(self.dim)).max())


def apply(g: Isometry, x) -> np.ndarray:
    """Image of a point (or of each row of an array of points)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != g.dim:
        raise GroupError(f"dimension mismatch: map is {g.dim}-d, point is {x.shape[-1]}-d")
    return x @ g.linear.T + g.translation


def _probe_points(space: ArmSpace) -> np.ndarray:
    c = space.center
    pts = [c]
    for i in range(space.dim):
        p = c.copy()
        p[i] += 0.25 * space.widths[i]
        pts.append(p)
    return np.array(pts)


@dataclass
class GroupReport:
    orthogonal: bool = True
    identity: bool = True
    closure: bool = True
    inverses: bool = True
    distinct: bool = True
    preserves_space: bool = True
    messages: list[str] = field(default_factory=list)
    identity_index: int | None = None
    cayley_table: np.ndarray | None = None
    inverse_table: np.ndarray | None = None

    @property
    def passed(self) -> bool:
        return all(
            (self.orthogonal, self.identity, self.closure, self.inverses, self.distinct, self.preserves_space)
        )

    def lines(self) -> list[str]:
        out = []
        for name in ("orthogonal", "identity", "closure", "inverses", "distinct", "preserves_space"):
            out.append(f"{name:16s} {'pass' if getattr(self, name) else 'FAIL'}")
        out.extend(self.messages)
        return out


def verify_group(elements, space: ArmSpace, probes: int = 256, rng=None) -> GroupReport:
    """Check the group axioms for a list of isometries acting on ``space``."""
    rng = np.random.default_rng(rng)
    rep = GroupReport()
    elements = list(elements)
    if not elements:
        raise GroupError("empty element list")
    d = space.dim
    for k, g in enumerate(elements):
        if g.dim != d:
            raise GroupError(f"element {k} is {g.dim}-d, space is {d}-d")

    for k, g in enumerate(elements):
        if g.orthogonality_defect() > ORTHO_TOL:
            rep.orthogonal = False
            rep.messages.append(f"element {k} is not orthogonal")

    base = _probe_points(space)
    sig = np.stack([apply(g, base) for g in elements])  # (|G|, d+1, d)

    def find(img: np.ndarray) -> int | None:
        err = np.abs(sig - img[None]).reshape(len(elements), -1).max(axis=1)
        hits = np.flatnonzero(err <= MAP_TOL)
        return int(hits[0]) if hits.size else None

    for a in range(len(elements)):
        for b in range(a + 1, len(elements)):
            if np.abs(sig[a] - sig[b]).max() <= MAP_TOL:
                rep.distinct = False
                rep.messages.append(f"elements {a} and {b} are the same map")

    e = find(base)
    if e is None:
        rep.identity = False
        rep.messages.append("identity map is missing")
    rep.identity_index = e

    n = len(elements)
    table = np.full((n, n), -1, dtype=int)
    for a, ga in enumerate(elements):
        for b in range(n):
            k = find(apply(ga, sig[b]))
            if k is None:
                rep.closure = False
                if len(rep.messages) < 20:
                    rep.messages.append(f"composition {a} o {b} leaves the set")
            else:
                table[a, b] = k

    inverse = np.full(n, -1, dtype=int)
    if e is not None:
        for a in range(n):
            hits = np.flatnonzero(table[a] == e)
            if hits.size:
                inverse[a] = hits[0]
            else:
                rep.inverses = False
                rep.messages.append(f"element {a} has no inverse in the set")
    else:
        rep.inverses = False

    pts = space.sample(rng, probes) if probes > 0 else np.empty((0, d))
    for k, g in enumerate(elements):
        if pts.size and not np.all(space.contains(apply(g, pts), tol=1e-9)):
            rep.preserves_space = False
            rep.messages.append(f"element {k} maps points outside the arm space")

    if rep.closure and e is not None:
        rep.cayley_table = table
    if rep.inverses:
        rep.inverse_table = inverse
    return rep


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    elements: tuple
    identity_index: int
    inverse_table: np.ndarray
    cayley_table: np.ndarray
    space: ArmSpace
    kind: str = "custom"

    def __post_init__(self):
        lin = np.stack([g.linear for g in self.elements])
        tr = np.stack([g.translation for g in self.elements])
        lin.setflags(write=False)
        tr.setflags(write=False)
        object.__setattr__(self, "_linear", lin)
        object.__setattr__(self, "_translation", tr)

    @classmethod
    def from_elements(cls, elements, space: ArmSpace, kind: str = "custom", rng=0) -> "FiniteGroup":
        elements = tuple(elements)
        rep = verify_group(elements, space, rng=rng)
        if not rep.passed:
            raise GroupError("not a group acting on the arm space: " + "; ".join(rep.messages[:5]))
        return cls(elements, rep.identity_index, rep.inverse_table, rep.cayley_table, space, kind)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return self.space.dim

    def images(self, x) -> np.ndarray:
        """``(|G|, d)`` array of ``g . x`` in element order."""
        x = as_point(x, self.dim)
        return np.einsum("gij,j->gi", self._linear, x) + self._translation

    def images_many(self, xs: np.ndarray) -> np.ndarray:
        """``(|G|, m, d)`` array of the images of every row of ``xs``."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return np.einsum("gij,mj->gmi", self._linear, xs) + self._translation[:, None, :]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "space": {"lower": self.space.lower.tolist(), "upper": self.space.upper.tolist()},
            "elements": [
                {"linear": g.linear.tolist(), "translation": g.translation.tolist()} for g in self.elements
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteGroup":
        space = ArmSpace(np.array(data["space"]["lower"]), np.array(data["space"]["upper"]))
        elems = [Isometry(np.array(e["linear"]), np.array(e["translation"])) for e in data["elements"]]
        return cls.from_elements(elems, space, kind=data.get("kind", "custom"))

    @classmethod
    def from_json(cls, text: str) -> "FiniteGroup":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------- constructors

def _require_cube(space: ArmSpace, kind: str):
    if not np.allclose(space.widths, space.widths[0]):
        raise GroupError(f"{kind} needs equal side lengths")


def _perm_matrix(perm) -> np.ndarray:
    d = len(perm)
    m = np.zeros((d, d))
    m[perm, np.arange(d)] = 1.0
    return m


def _dihedral_linear() -> dict[str, np.ndarray]:
    r = np.array([[0.0, -1.0], [1.0, 0.0]])
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    mats = {}
    for k in range(4):
        mats[f"r{k}"] = np.linalg.matrix_power(r, k)
        mats[f"s{k}"] = np.linalg.matrix_power(r, k) @ swap
    return mats


def _linear_set(kind: str, d: int, space: ArmSpace) -> list[np.ndarray]:
    if kind == "trivial":
        return [np.eye(d)]
    if kind == "reflect1d":
        if d != 1:
            raise GroupError("reflect1d is only defined for d = 1")
        return [np.eye(1), -np.eye(1)]
    if kind == "signflip":
        return [np.diag(s) for s in itertools.product((1.0, -1.0), repeat=d)]
    if kind == "permutation":
        _require_cube(space, kind)
        return [_perm_matrix(p) for p in itertools.permutations(range(d))]
    if kind == "cyclic":
        _require_cube(space, kind)
        return [_perm_matrix(np.roll(np.arange(d), k)) for k in range(d)]
    if kind in ("dihedral8", "dihedral4", "dihedral2", "rotation4"):
        if d != 2:
            raise GroupError(f"{kind} is only defined for d = 2")
        _require_cube(space, kind)
        m = _dihedral_linear()
        names = {
            "dihedral8": ["r0", "r1", "r2", "r3", "s0", "s1", "s2", "s3"],
            "dihedral4": ["r0", "r2", "s0", "s2"],
            "dihedral2": ["r0", "s0"],
            "rotation4": ["r0", "r1", "r2", "r3"],
        }[kind]
        return [m[k] for k in names]
    raise GroupError(f"unknown group kind {kind!r}")


GROUP_KINDS = (
    "trivial", "reflect1d", "signflip", "permutation", "cyclic",
    "dihedral2", "dihedral4", "dihedral8", "rotation4",
)


def make_group(kind: str, d: int, space: ArmSpace | None = None) -> FiniteGroup:
    """Build and verify one of the stock groups, acting about the box centre.

    ``dihedral2`` and ``dihedral4`` are the chain of subgroups of the square's
    symmetry group generated by the main diagonal swap and by both diagonal
    swaps respectively.
    """
    space = space or ArmSpace.unit(d)
    if space.dim != d:
        raise GroupError(f"space is {space.dim}-d but d={d}")
    mats = _linear_set(kind, d, space)
    elems = [Isometry.about(a, space.center) for a in mats]
    return FiniteGroup.from_elements(elems, space, kind=kind)


def direct_product(g1: FiniteGroup, g2: FiniteGroup) -> FiniteGroup:
    """Product group acting block-diagonally on the concatenated boxes."""
    space = ArmSpace(
        np.concatenate([g1.space.lower, g2.space.lower]),
        np.concatenate([g1.space.upper, g2.space.upper]),
    )
    d1, d2 = g1.dim, g2.dim
    elems = []
    for a in g1.elements:
        for b in g2.elements:
            lin = np.zeros((d1 + d2, d1 + d2))
            lin[:d1, :d1] = a.linear
            lin[d1:, d1:] = b.linear
            elems.append(Isometry(lin, np.concatenate([a.translation, b.translation])))
    return FiniteGroup.from_elements(elems, space, kind=f"{g1.kind}*{g2.kind}")


# ------------------------------------------------------- orbits and stabilisers

def orbit(group: FiniteGroup, x, tol: float = 1e-9) -> np.ndarray:
    """Distinct images of ``x``; images closer than ``tol`` are merged."""
    kept: list[np.ndarray] = []
    for y in group.images(x):
        if all(np.linalg.norm(y - k) > tol for k in kept):
            kept.append(y)
    if group.order % len(kept):
        warnings.warn(
            f"orbit size {len(kept)} does not divide |G|={group.order}; tolerance {tol} is too coarse here",
            RuntimeWarning,
            stacklevel=2,
        )
    return np.array(kept)


def stabilizer(group: FiniteGroup, x, tol: float = 1e-9) -> list[int]:
    x = as_point(x, group.dim)
    dist = np.linalg.norm(group.images(x) - x, axis=1)
    return [int(k) for k in np.flatnonzero(dist <= tol)]


def find_free_point(group: FiniteGroup, rng=None, tol: float = 1e-6, max_tries: int = 1000) -> np.ndarray:
    """Random point whose orbit has ``|G|`` images pairwise more than ``10*tol`` apart."""
    rng = np.random.default_rng(rng)
    best, best_sep = None, -1.0
    for _ in range(max_tries):
        x = group.space.sample(rng, 1)[0]
        imgs = group.images(x)
        if group.order == 1:
            return x
        dist = pairwise_distances(imgs, imgs)
        sep = float(dist[np.triu_indices(group.order, 1)].min())
        if sep > 10 * tol:
            return x
        if sep > best_sep:
            best, best_sep = x, sep
    raise SearchError(
        f"no free point after {max_tries} draws; nearest miss {best} with orbit separation {best_sep:.3g}"
    )


# ----------------------------------------------------------- Dirichlet domains

INTERIOR = "interior"
BOUNDARY = "closure_boundary"
OUTSIDE = "outside"


@dataclass(frozen=True, eq=False)
class DirichletDomain:
    """Points of the box strictly closer to ``base_point`` than to any other orbit point."""

    base_point: np.ndarray
    g_indices: np.ndarray
    images: np.ndarray
    space: ArmSpace
    orbit_points: np.ndarray = field(repr=False)

    @property
    def halfspaces(self) -> list[tuple[int, np.ndarray]]:
        return list(zip(self.g_indices.tolist(), self.images))

    @property
    def default_tol(self) -> float:
        return 1e-9 * self.space.diameter

    def margins(self, xs: np.ndarray) -> np.ndarray:
        """``D(x, g.x0) - D(x, x0)`` for each row of ``xs`` (m, |G|-1)."""
        xs = np.atleast_2d(xs)
        if not len(self.images):
            return np.empty((xs.shape[0], 0))
        d0 = np.linalg.norm(xs - self.base_point, axis=1)
        return pairwise_distances(xs, self.images) - d0[:, None]

    def boundary_distance(self, xs: np.ndarray) -> np.ndarray:
        """Signed distance to the nearest bisector hyperplane or box face.

        Exact for points of the closed domain, since it is a convex polytope.
        """
        xs = np.atleast_2d(xs)
        out = self.space.face_distance(xs)
        if len(self.images):
            sq = lambda a, b: ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
            num = sq(xs, self.images) - sq(xs, self.base_point[None])
            den = 2 * np.linalg.norm(self.images - self.base_point, axis=1)
            out = np.minimum(out, (num / den[None, :]).min(axis=1))
        return out


def dirichlet_domain(group: FiniteGroup, base_point, tol: float = 1e-6) -> DirichletDomain:
    x0 = as_point(base_point, group.dim)
    if len(stabilizer(group, x0, tol)) > 1:
        raise DomainError(f"base point {x0} has a non-trivial stabiliser")
    imgs = group.images(x0)
    keep = np.array([k for k in range(group.order) if k != group.identity_index], dtype=int)
    x0 = x0.copy()
    x0.setflags(write=False)
    imgs.setflags(write=False)
    return DirichletDomain(x0, keep, imgs[keep], group.space, imgs)


def domain_membership(dom: DirichletDomain, x, tol: float | None = None) -> str:
    tol = dom.default_tol if tol is None else tol
    m = dom.margins(as_point(x, dom.space.dim))[0]
    if m.size == 0 or m.min() > tol:
        return INTERIOR
    if m.min() >= -tol:
        return BOUNDARY
    return OUTSIDE


def canonicalize(group: FiniteGroup, dom: DirichletDomain, x, tol: float | None = None) -> tuple[int, np.ndarray]:
    """First element (by index) mapping ``x`` into the closed domain."""
    x = as_point(x, group.dim)
    base = dom.default_tol if tol is None else tol
    imgs = group.images(x)
    order = [group.identity_index] + [k for k in range(group.order) if k != group.identity_index]
    for scale in (1.0, 1e2, 1e4):
        t = base * scale
        for k in order:
            if domain_membership(dom, imgs[k], t) != OUTSIDE:
                return k, imgs[k]
    raise DomainError(f"no image of {x} lands in the closed domain; the domain is inconsistent")


def canonicalize_many(group: FiniteGroup, dom: DirichletDomain, xs: np.ndarray, tol: float | None = None):
    """Vectorised :func:`canonicalize` for many points.

    ``g.x`` lies in the closed domain exactly when ``g^-1 . x0`` is a nearest
    orbit point of the base point to ``x``, which avoids testing every image.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    tol = dom.default_tol if tol is None else tol
    dist = pairwise_distances(xs, dom.orbit_points)  # column k: D(x, k.x0)
    ok = dist <= dist.min(axis=1, keepdims=True) + tol
    # column k admits the element inverse[k]; prefer identity, then lowest index
    rank = np.array(group.inverse_table, dtype=float)
    rank[group.identity_index] = -1
    cand = np.where(ok, rank[None, :], np.inf)
    col = cand.argmin(axis=1)
    g = group.inverse_table[col]
    imgs = group.images_many(xs)
    return g, imgs[g, np.arange(xs.shape[0])]
