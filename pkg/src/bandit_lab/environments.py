"""Invariant Lipschitz reward instances.

Mean functions are vectorised: they take an ``(m, d)`` array and return ``m``
values.  Rewards are Bernoulli by default.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .geometry import ArmSpace, pairwise_distances
from .group_action import DirichletDomain, FiniteGroup, canonicalize_many, dirichlet_domain, make_group, orbit

BASE_LEVEL = 1.0 / 3.0


class InstanceError(ValueError):
    """Infeasible or inconsistent instance parameters."""


@dataclass(frozen=True, eq=False)
class RewardInstance:
    mean_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    group: FiniteGroup
    descriptor: dict
    optimum_value: float
    certification_gap: float = 0.0
    noise: str = "bernoulli"
    sigma: float = 0.1

    @property
    def space(self) -> ArmSpace:
        return self.group.space

    def mean(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self.mean_fn(x[None, :])[0])
        return self.mean_fn(x)

    def with_noise(self, noise: str, sigma: float = 0.1) -> "RewardInstance":
        if noise not in ("bernoulli", "truncated_gaussian"):
            raise InstanceError(f"unknown noise model {noise!r}")
        return RewardInstance(self.mean_fn, self.group, self.descriptor, self.optimum_value,
                              self.certification_gap, noise, sigma)


@dataclass(frozen=True, eq=False)
class EnsembleInstance(RewardInstance):
    center: np.ndarray = None
    delta: float = 0.0


@dataclass(frozen=True, eq=False)
class StrictPacking:
    points: np.ndarray
    delta: float
    domain: DirichletDomain

    def __len__(self) -> int:
        return self.points.shape[0]


def make_constant_f0(group: FiniteGroup | None = None) -> RewardInstance:
    group = group or make_group("trivial", 1)
    return RewardInstance(lambda x: np.full(len(x), BASE_LEVEL), group, {"kind": "constant"}, BASE_LEVEL)


def strict_packing_of_domain(dom: DirichletDomain, group: FiniteGroup, delta: float, rng=None,
                             budget: int = 2000, batch: int = 256) -> StrictPacking:
    """Greedy random strict delta-packing of the fundamental domain.

    Candidates are uniform points of the box mapped into the closed domain;
    a candidate is accepted when its distance to the domain boundary exceeds
    ``delta`` and it is more than ``delta`` away from every accepted point.
    Stops after ``budget`` consecutive rejections.
    """
    if not delta > 0:
        raise InstanceError("delta must be positive")
    rng = np.random.default_rng(rng)
    accepted: list[np.ndarray] = []
    fails = 0
    while fails < budget:
        _, cand = canonicalize_many(group, dom, dom.space.sample(rng, batch))
        deep = dom.boundary_distance(cand) > delta
        for x, ok in zip(cand, deep):
            if ok and all(np.linalg.norm(x - a) > delta for a in accepted):
                accepted.append(x)
                fails = 0
            else:
                fails += 1
                if fails >= budget:
                    break
    if not accepted:
        raise InstanceError(f"delta={delta} is too large: no point of the domain is farther than delta from its boundary")
    pts = np.array(accepted)
    pts.setflags(write=False)
    return StrictPacking(pts, float(delta), dom)


def _bump_mean(centers: np.ndarray, delta: float):
    r = delta / 2

    def f(x):
        near = pairwise_distances(np.atleast_2d(x), centers).min(axis=1)
        return BASE_LEVEL + np.maximum(r - near, 0.0)

    return f


def make_bump_instance(pack: StrictPacking, index: int, group: FiniteGroup) -> EnsembleInstance:
    """Member ``index`` of the lower-bound ensemble: a cone of height delta/2 on each orbit point."""
    delta = pack.delta
    if not 0 < delta < 2 / 3:
        raise InstanceError("delta must lie in (0, 2/3)")
    if not 0 <= index < len(pack):
        raise InstanceError(f"index {index} outside packing of size {len(pack)}")
    center = pack.points[index]
    centers = orbit(group, center, tol=1e-12)
    if len(centers) > 1:
        gaps = pairwise_distances(centers, centers)[np.triu_indices(len(centers), 1)]
        if gaps.min() < delta:
            raise InstanceError("orbit balls of radius delta/2 overlap; not a strict packing")
    desc = {"kind": "bump", "delta": delta, "index": int(index), "center": center.tolist(), "group": group.kind}
    return EnsembleInstance(_bump_mean(centers, delta), group, desc, BASE_LEVEL + delta / 2,
                            center=center, delta=delta)


def make_centered_bump(group: FiniteGroup, center, delta: float) -> EnsembleInstance:
    """Bump instance for an explicit centre (checked to be a strict packing point)."""
    dom = dirichlet_domain(group, center)
    if dom.boundary_distance(np.asarray(center, dtype=float))[0] <= delta:
        raise InstanceError("centre is within delta of the domain boundary")
    pack = StrictPacking(np.atleast_2d(np.asarray(center, dtype=float)), float(delta), dom)
    return make_bump_instance(pack, 0, group)


def _gaussian_mixture(centers, widths, weights):
    def h(x):
        sq = ((x[:, None, :] - centers[None]) ** 2).sum(-1)
        return (weights * np.exp(-sq / (2 * widths ** 2))).sum(axis=1)

    def grad(x):
        diff = x[:, None, :] - centers[None]
        k = weights * np.exp(-(diff ** 2).sum(-1) / (2 * widths ** 2)) / widths ** 2
        return -(k[:, :, None] * diff).sum(axis=1)

    # spectral norm of each bump's Hessian is at most weight / width**2
    hess = float((np.abs(weights) / widths ** 2).sum())
    return h, grad, hess


def make_smooth_invariant_instance(group: FiniteGroup, rng=None, kind: str = "gaussian",
                                   n_bumps: int = 5, grid_points: int = 200_000) -> RewardInstance:
    """Group average of a random Gaussian-bump mixture, rescaled to be 1-Lipschitz in [0.1, 0.9].

    The Lipschitz modulus is certified as the largest gradient norm on a
    grid plus the Hessian bound times the grid half-diagonal.
    """
    if kind != "gaussian":
        raise InstanceError(f"unknown smooth instance kind {kind!r}")
    rng = np.random.default_rng(rng)
    space = group.space
    d = space.dim
    k = int(rng.integers(1, n_bumps + 1))
    centers = space.sample(rng, k)
    widths = space.diameter * rng.uniform(0.08, 0.25, size=k)
    weights = rng.uniform(0.3, 1.0, size=k)
    h, grad, hess = _gaussian_mixture(centers, widths, weights)
    lin = np.stack([g.linear for g in group.elements])
    tr = np.stack([g.translation for g in group.elements])

    def averaged(x):
        imgs = np.einsum("gij,mj->gmi", lin, x) + tr[:, None, :]
        return np.mean([h(im) for im in imgs], axis=0)

    def averaged_grad(x):
        imgs = np.einsum("gij,mj->gmi", lin, x) + tr[:, None, :]
        return np.mean([grad(im) @ a for im, a in zip(imgs, lin)], axis=0)

    per_axis = max(2, int(round(grid_points ** (1 / d))))
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(space.lower, space.upper)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    chunks = range(0, len(grid), 50_000)
    vals = np.concatenate([averaged(grid[i:i + 50_000]) for i in chunks])
    slope = max(float(np.linalg.norm(averaged_grad(grid[i:i + 50_000]), axis=1).max()) for i in chunks)
    step = space.widths / (per_axis - 1)
    half_diag = float(np.linalg.norm(step) / 2)
    lip = slope + hess * half_diag
    lo_v, hi_v = float(vals.min()), float(vals.max())
    # at most 1-Lipschitz, and the grid range must fit in [0.1, 0.9]
    scale = min(1.0 / lip, 0.8 / max(hi_v - lo_v, 1e-12))
    offset = 0.1 - scale * lo_v

    def mean(x):
        return np.clip(offset + scale * averaged(np.atleast_2d(x)), 0.1, 0.9)

    # certify the optimum: best grid points, then local polishing
    best = grid[np.argsort(vals)[-5:]]
    opt = float(mean(best).max())
    for x0 in best:
        res = minimize(lambda z: -mean(z[None, :])[0], x0, method="L-BFGS-B",
                       bounds=list(zip(space.lower, space.upper)))
        opt = max(opt, float(-res.fun))
    desc = {"kind": "smooth", "shape": kind, "group": group.kind, "bumps": k,
            "centers": centers.tolist(), "widths": widths.tolist(), "weights": weights.tolist(),
            "scale": scale, "offset": offset, "lipschitz_bound": lip * scale}
    # a 1-Lipschitz function exceeds its best grid value by at most the half-diagonal
    return RewardInstance(mean, group, desc, opt, certification_gap=half_diag)


def sample_reward(env: RewardInstance, x, rng) -> float:
    m = env.mean(np.asarray(x, dtype=float))
    return reward_from_uniform(env, m, rng.random())


def reward_from_uniform(env: RewardInstance, m: float, u: float) -> float:
    """Reward with mean ``m`` driven by a single uniform variate ``u``."""
    if env.noise == "bernoulli":
        return 1.0 if u < m else 0.0
    # symmetric truncation keeps the mean at m and the support inside [0, 1]
    w = min(m, 1.0 - m)
    if w <= 0:
        return m
    nd = NormalDist()
    b = w / env.sigma
    lo, hi = nd.cdf(-b), nd.cdf(b)
    p = min(max(lo + u * (hi - lo), 1e-300), 1 - 1e-16)
    return min(max(m + env.sigma * nd.inv_cdf(p), m - w), m + w)


@dataclass
class InstanceReport:
    max_lipschitz_ratio: float
    max_invariance_residual: float
    min_value: float
    max_value: float
    lipschitz_ok: bool
    invariance_ok: bool
    range_ok: bool

    @property
    def passed(self) -> bool:
        return self.lipschitz_ok and self.invariance_ok and self.range_ok

    def lines(self) -> list[str]:
        return [
            f"lipschitz  {'pass' if self.lipschitz_ok else 'FAIL'}  max ratio {self.max_lipschitz_ratio:.6g}",
            f"invariance {'pass' if self.invariance_ok else 'FAIL'}  max residual {self.max_invariance_residual:.3g}",
            f"range      {'pass' if self.range_ok else 'FAIL'}  [{self.min_value:.6g}, {self.max_value:.6g}]",
        ]


def verify_instance(inst: RewardInstance, pairs: int = 10_000, samples: int = 10_000, rng=None,
                    points: np.ndarray | None = None) -> InstanceReport:
    """Sampled Lipschitz, invariance and range checks.

    Half of the Lipschitz pairs are short (within 5% of the diameter) so that
    local steepness is actually probed.  ``points`` adds caller-chosen
    sample locations, e.g. points near a bump.
    """
    rng = np.random.default_rng(rng)
    space = inst.space
    a = space.sample(rng, pairs)
    b = space.sample(rng, pairs)
    half = pairs // 2
    step = rng.normal(size=(half, space.dim))
    step *= (0.05 * space.diameter * rng.random(half) / np.linalg.norm(step, axis=1))[:, None]
    b[:half] = np.clip(a[:half] + step, space.lower, space.upper)
    dist = np.linalg.norm(a - b, axis=1)
    keep = dist > 1e-12
    ratio = np.abs(inst.mean(a) - inst.mean(b))[keep] / dist[keep]
    max_ratio = float(ratio.max()) if ratio.size else 0.0

    xs = space.sample(rng, samples)
    if points is not None:
        xs = np.vstack([xs, np.atleast_2d(points)])
    base = inst.mean(xs)
    resid = 0.0
    for im in inst.group.images_many(xs):
        resid = max(resid, float(np.abs(inst.mean(im) - base).max()))
    lo, hi = float(base.min()), float(base.max())
    return InstanceReport(max_ratio, resid, lo, hi, max_ratio <= 1 + 1e-6, resid <= 1e-9,
                          lo >= 0.0 and hi <= 1.0)


@dataclass(frozen=True, eq=False)
class FiniteInstance:
    """K-armed instance for the unstructured warm-up; arms are integer indices."""

    means: np.ndarray
    noise: str = "bernoulli"
    sigma: float = 0.1

    @property
    def optimum_value(self) -> float:
        return float(self.means.max())

    certification_gap = 0.0

    def mean(self, arms) -> np.ndarray | float:
        arms = np.asarray(arms)
        if arms.ndim == 0:
            return float(self.means[int(arms)])
        return self.means[arms.astype(int).ravel()]


def make_invariant_finite_instance(perms: np.ndarray, rng=None, low: float = 0.2, high: float = 0.8) -> FiniteInstance:
    """Random arm means constant on the orbits of a permutation group on ``[K]``."""
    rng = np.random.default_rng(rng)
    perms = np.asarray(perms)
    K = perms.shape[1]
    means = np.full(K, np.nan)
    for k in range(K):
        if np.isnan(means[k]):
            means[np.unique(perms[:, k])] = rng.uniform(low, high)
    return FiniteInstance(means)
