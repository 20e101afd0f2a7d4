"""Index policies over a finite set of arms.

All continuum policies share one engine: the arm maximising the UCB index is
played (unobserved arms first; ties go to the least-played arm, then the
lowest index), and the reward is credited to every arm in the played arm's
observation set.
"""
from __future__ import annotations

import math
import warnings

import numpy as np

from .geometry import DeltaNet
from .group_action import FiniteGroup
from .mesh_index import CoverTree, approx_neighborhood, build_tree
from .orbit_graph import CliqueCover, OrbitGraph, neighborhood_of_orbit


class PolicyError(RuntimeError):
    pass


class RegimeWarning(UserWarning):
    """Horizon below the regime where the regret guarantee applies."""


def choose_delta(n: float, group_order: int, d: int) -> float:
    """Discretisation scale ``(log n / (n |G|)) ** (1 / (d + 2))``."""
    if n < 2:
        raise ValueError("horizon must be at least 2")
    if n < group_order ** (2 * d + 2):
        warnings.warn(
            f"n={n:g} is below |G|^(2d+2)={group_order ** (2 * d + 2):g}; regret guarantee not in force",
            RegimeWarning,
            stacklevel=2,
        )
    return (math.log(n) / (n * group_order)) ** (1.0 / (d + 2))


class UcbState:
    """Per-arm counters ``O`` (observations), ``S`` (reward sums), ``T`` (plays) and index ``U``."""

    def __init__(self, n_arms: int, horizon: int, delta: float = 0.0, slack: float = 0.0,
                 discretisation_bonus: float | None = None):
        self.horizon = int(horizon)
        self.delta = float(delta)
        self.slack = float(slack)
        self.bonus = 3 * self.delta if discretisation_bonus is None else float(discretisation_bonus)
        self.O = np.zeros(n_arms, dtype=np.int64)
        self.S = np.zeros(n_arms)
        self.T = np.zeros(n_arms, dtype=np.int64)
        self.U = np.full(n_arms, np.inf)
        self._log_term = 2 * math.log(self.horizon) if self.horizon > 1 else 0.0

    def __len__(self) -> int:
        return self.U.shape[0]

    def means(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.O > 0, self.S / np.maximum(self.O, 1), np.nan)

    def select(self) -> int:
        """Largest index; ties go to the least-played arm, then the lowest index."""
        best = int(np.argmax(self.U))
        u = self.U[best]
        tied = np.flatnonzero(self.U == u)
        if tied.size > 1:
            # arms that are always observed together keep identical indices,
            # so a pure lowest-index rule would starve the later ones for good
            best = int(tied[np.argmin(self.T[tied])])
        return best

    def update(self, played: int, reward: float, observed: np.ndarray):
        self.T[played] += 1
        self.O[observed] += 1
        self.S[observed] += reward
        o = self.O[observed]
        self.U[observed] = self.S[observed] / o + np.sqrt(self._log_term / o) + self.bonus + self.slack


class IndexPolicy:
    """Shared select/update loop; subclasses supply :meth:`observation_set`."""

    name = "index"

    def __init__(self, arm_points: np.ndarray, horizon: int, delta: float = 0.0, slack: float = 0.0,
                 discretisation_bonus: float | None = None):
        self.arm_points = arm_points
        self.horizon = horizon
        self.state = UcbState(len(arm_points), horizon, delta, slack, discretisation_bonus)
        self.chosen: list[int] = []
        self.observed_sizes: list[int] = []
        self._cache: dict[int, np.ndarray] = {}

    @property
    def n_arms(self) -> int:
        return len(self.state)

    def observation_set(self, arm: int) -> np.ndarray:
        raise NotImplementedError

    def _observed(self, arm: int) -> np.ndarray:
        nb = self._cache.get(arm)
        if nb is None:
            nb = self.observation_set(arm)
            if arm not in nb:
                raise PolicyError(f"arm {arm} is missing from its own observation set")
            self._cache[arm] = nb
        return nb

    def select(self) -> int:
        return self.state.select()

    def update(self, arm: int, reward: float, observed: np.ndarray | None = None):
        nb = self._observed(arm) if observed is None else np.asarray(observed, dtype=int)
        if observed is not None and arm not in nb:
            raise PolicyError(f"arm {arm} is missing from the supplied neighbourhood")
        self.state.update(arm, reward, nb)
        self.chosen.append(arm)
        self.observed_sizes.append(len(nb))

    def check_clique_counts(self, cover: CliqueCover) -> bool:
        """Every arm of a clique has been observed at least as often as the clique was played."""
        for c in cover.cliques:
            if self.state.O[c].min() < self.state.T[c].sum():
                return False
        return True


class UniformMeshN(IndexPolicy):
    """Play the best net vertex; observe every vertex within ``2 delta`` of its orbit.

    ``engine="tree"`` uses the tree of coverings; the resulting superset is
    paid for by adding its distance slack to every index.
    """

    name = "uniform-mesh-n"

    def __init__(self, net: DeltaNet, group: FiniteGroup, horizon: int, engine: str = "brute",
                 tree: CoverTree | None = None):
        self.net = net
        self.group = group
        self.engine = engine
        self.radius = 2 * net.delta
        slack = 0.0
        if engine == "tree":
            self.tree = tree or build_tree(net.space, net)
            slack = self.tree.slack(self.radius)
        elif engine != "brute":
            raise PolicyError(f"unknown neighbourhood engine {engine!r}")
        super().__init__(net.vertices, horizon, net.delta, slack)

    def observation_set(self, arm: int) -> np.ndarray:
        x = self.net.vertices[arm]
        if self.engine == "tree":
            return approx_neighborhood(self.tree, self.group, x, self.radius)
        return neighborhood_of_orbit(self.group, self.net, x, self.radius)


class UniformMesh(IndexPolicy):
    """Symmetry-oblivious baseline: only the played vertex is observed."""

    name = "uniform-mesh"

    def __init__(self, net: DeltaNet, horizon: int):
        self.net = net
        super().__init__(net.vertices, horizon, net.delta)

    def observation_set(self, arm: int) -> np.ndarray:
        return np.array([arm])


class UCBN(IndexPolicy):
    """UCB with side observations along the closed neighbourhoods of an arbitrary graph."""

    name = "ucb-n"

    def __init__(self, graph: OrbitGraph, horizon: int, delta: float = 0.0,
                 discretisation_bonus: float | None = 0.0, arm_points: np.ndarray | None = None):
        self.graph = graph
        points = graph.net.vertices if arm_points is None else arm_points
        super().__init__(points, horizon, delta, 0.0, discretisation_bonus)

    def observation_set(self, arm: int) -> np.ndarray:
        nb = self.graph.neighbors(arm)
        if arm not in nb:
            nb = np.union1d(nb, [arm])
        return nb


def orbit_representatives(perms: np.ndarray) -> list[np.ndarray]:
    """Orbits of a permutation group given as rows ``perms[g, k] = g(k)``."""
    perms = np.asarray(perms, dtype=int)
    K = perms.shape[1]
    seen = np.zeros(K, dtype=bool)
    orbits = []
    for k in range(K):
        if not seen[k]:
            orb = np.unique(perms[:, k])
            seen[orb] = True
            orbits.append(orb)
    return orbits


def cyclic_shift_group(K: int, order: int) -> np.ndarray:
    """Cyclic group of order ``order`` acting on ``[K]`` by shifts of ``K/order``."""
    if K % order:
        raise ValueError(f"order {order} does not divide K={K}")
    step = K // order
    return np.array([(np.arange(K) + j * step) % K for j in range(order)])


class InvariantUCB1:
    """UCB1 over one representative per orbit of a free permutation action on ``[K]``."""

    name = "invariant-ucb1"

    def __init__(self, K: int, perms: np.ndarray, horizon: int):
        perms = np.asarray(perms, dtype=int)
        if perms.ndim != 2 or perms.shape[1] != K:
            raise PolicyError("perms must be an array of shape (|G|, K)")
        for k in range(K):
            fixers = int((perms[:, k] == k).sum())
            if fixers != 1:
                raise PolicyError(f"action is not free: arm {k} is fixed by {fixers} group elements")
        self.K = K
        self.horizon = horizon
        self.orbits = orbit_representatives(perms)
        self.representatives = np.array([o[0] for o in self.orbits])
        self.arm_points = np.arange(K)
        m = len(self.representatives)
        self.counts = np.zeros(m, dtype=np.int64)
        self.sums = np.zeros(m)
        self.t = 0
        self.chosen: list[int] = []
        self.observed_sizes: list[int] = []

    @property
    def n_arms(self) -> int:
        return self.K

    def select(self) -> int:
        self.t += 1
        if (self.counts == 0).any():
            j = int(np.argmin(self.counts))
        else:
            idx = self.sums / self.counts + np.sqrt(2 * math.log(self.t) / self.counts)
            j = int(np.argmax(idx))
        self._last = j
        return int(self.representatives[j])

    def update(self, arm: int, reward: float, observed=None):
        j = int(np.flatnonzero(self.representatives == arm)[0])
        self.counts[j] += 1
        self.sums[j] += reward
        self.chosen.append(arm)
        self.observed_sizes.append(len(self.orbits[j]))
