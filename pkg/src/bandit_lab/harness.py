"""Seeded experiment execution, sweeps, scaling fits and empirical covering-ratio checks.

Random streams: replication seed ``s`` drives rewards through
``SeedSequence([s, 0])``.  Instances and fundamental domains are generated
from ``SeedSequence([instance_seed, 1])`` so that every replication of a
sweep cell faces the same instance.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np
from scipy import stats

from .environments import (
    FiniteInstance,
    make_bump_instance,
    make_constant_f0,
    make_invariant_finite_instance,
    make_smooth_invariant_instance,
    reward_from_uniform,
    strict_packing_of_domain,
)
from .geometry import ArmSpace, build_grid_net
from .group_action import dirichlet_domain, find_free_point, make_group
from .orbit_graph import build_graph, check_partition, clique_cover, vertices_covering_closure
from .policies import (
    UCBN,
    InvariantUCB1,
    RegimeWarning,
    UniformMesh,
    UniformMeshN,
    choose_delta,
    cyclic_shift_group,
)

ALGOS = ("uniform-mesh", "uniform-mesh-n", "ucb-n", "invariant-ucb1")
CSV_COLUMNS = (
    "algo", "group", "group_order", "delta", "n", "seed",
    "final_regret", "wall_ms", "clique_count", "net_size",
)
TIMING_COLUMNS = ("wall_ms",)


def _default_seed() -> int:
    return int(os.environ.get("BANDIT_LAB_SEED", "0"))


def stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(purpose)]))


@dataclass
class ExperimentConfig:
    dim: int = 1
    group: str = "reflect1d"
    instance: str = "bump"
    instance_params: dict = field(default_factory=dict)
    instance_group: str | None = None
    algo: str = "uniform-mesh-n"
    horizon: int = 10_000
    delta: str | float = "auto"
    replications: int = 1
    base_seed: int = field(default_factory=_default_seed)
    engine: str = "brute"
    arms: int = 12
    output: str | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algo {self.algo!r}; choose from {ALGOS}")
        if self.engine not in ("brute", "tree"):
            raise ValueError("engine must be 'brute' or 'tree'")

    def config_hash(self) -> str:
        d = dataclasses.asdict(self)
        d.pop("output", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @property
    def seeds(self) -> list[int]:
        return [self.base_seed + r for r in range(self.replications)]


def load_config_file(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib

        return tomllib.loads(text)
    return json.loads(text)


def merge_config(file_values: dict, flag_values: dict, cls=ExperimentConfig):
    """Config-file values overridden by explicitly given flags (``None`` means not given)."""
    names = {f.name for f in dataclasses.fields(cls)}
    merged = {k: v for k, v in file_values.items() if k in names}
    unknown = set(file_values) - names
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    merged.update({k: v for k, v in flag_values.items() if v is not None and k in names})
    return cls(**merged)


# ----------------------------------------------------------------- experiments

@dataclass
class RegretTrace:
    instantaneous: np.ndarray
    cumulative: np.ndarray
    arms: np.ndarray
    seed: int
    config_hash: str = ""
    certification_gap: float = 0.0

    @property
    def final(self) -> float:
        return float(self.cumulative[-1]) if self.cumulative.size else 0.0


def run_episode(env, policy, n: int, seed: int, config_hash: str = "") -> RegretTrace:
    """``n`` rounds of select, sample, update against ``env``; regret is measured on true means."""
    rng = stream(seed, 0)
    means = np.asarray(env.mean(policy.arm_points), dtype=float).ravel()
    fstar = float(env.optimum_value)
    u = rng.random(n)
    inst = np.empty(n)
    arms = np.empty(n, dtype=np.int64)
    bernoulli = getattr(env, "noise", "bernoulli") == "bernoulli"
    select, update = policy.select, policy.update
    for t in range(n):
        a = select()
        m = means[a]
        y = (1.0 if u[t] < m else 0.0) if bernoulli else reward_from_uniform(env, m, u[t])
        update(a, y)
        inst[t] = fstar - m
        arms[t] = a
    return RegretTrace(inst, np.cumsum(inst), arms, int(seed), config_hash,
                       float(getattr(env, "certification_gap", 0.0)))


def _group_order_of(kind: str, dim: int) -> int:
    if kind.startswith("shift"):
        return int(kind[5:] or 1)
    return make_group(kind, dim).order


def build_instance(cfg: ExperimentConfig):
    """Reward instance for ``cfg``; depends only on the config, never on the replication."""
    params = dict(cfg.instance_params)
    inst_seed = int(params.get("seed", 0))
    kind = cfg.instance_group or cfg.group
    if cfg.algo == "invariant-ucb1" or cfg.instance == "finite":
        order = _group_order_of(kind, cfg.dim)
        return make_invariant_finite_instance(cyclic_shift_group(cfg.arms, order), rng=stream(inst_seed, 1))
    group = make_group(kind, cfg.dim)
    if cfg.instance == "constant":
        return make_constant_f0(group)
    if cfg.instance == "smooth":
        return make_smooth_invariant_instance(group, rng=stream(inst_seed, 1))
    if cfg.instance == "bump":
        rng = stream(inst_seed, 1)
        delta_env = float(params.get("delta", 0.1))
        dom = dirichlet_domain(group, find_free_point(group, rng))
        pack = strict_packing_of_domain(dom, group, delta_env, rng=rng)
        return make_bump_instance(pack, int(params.get("index", 0)), group)
    raise ValueError(f"unknown instance kind {cfg.instance!r}")


def resolve_delta(cfg: ExperimentConfig, group_order: int) -> float:
    if cfg.delta in ("auto", None):
        # the symmetry-oblivious baseline tunes its scale as if |G| = 1
        order = 1 if cfg.algo == "uniform-mesh" else group_order
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            return choose_delta(max(cfg.horizon, 2), order, cfg.dim)
    return float(cfg.delta)


@dataclass
class Setup:
    """Everything a replication needs, built once per sweep cell."""

    cfg: ExperimentConfig
    env: object
    group: object
    delta: float
    net: object = None
    clique_count: int = -1
    net_size: int = 0

    def make_policy(self):
        cfg = self.cfg
        if cfg.algo == "invariant-ucb1":
            perms = cyclic_shift_group(cfg.arms, _group_order_of(cfg.group, cfg.dim))
            return InvariantUCB1(cfg.arms, perms, cfg.horizon)
        if cfg.algo == "uniform-mesh":
            return UniformMesh(self.net, cfg.horizon)
        if cfg.algo == "uniform-mesh-n":
            return UniformMeshN(self.net, self.group, cfg.horizon, engine=cfg.engine)
        graph = build_graph(self.net, self.group, 2 * self.net.delta)
        return UCBN(graph, cfg.horizon, delta=self.net.delta, discretisation_bonus=None)


def prepare(cfg: ExperimentConfig, clique_stats: bool = False) -> Setup:
    env = build_instance(cfg)
    if cfg.algo == "invariant-ucb1":
        order = _group_order_of(cfg.group, cfg.dim)
        return Setup(cfg, env, None, 0.0, None, cfg.arms // order, cfg.arms)
    group = make_group(cfg.group, cfg.dim) if cfg.algo != "uniform-mesh" else make_group("trivial", cfg.dim)
    probe = env.space.sample(stream(0, 2), 256)
    base = env.mean(probe)
    if any(np.abs(env.mean(im) - base).max() > 1e-9 for im in group.images_many(probe)):
        raise ValueError(f"instance built for {cfg.instance_group or cfg.group!r} is not invariant under {cfg.group!r}")
    delta = resolve_delta(cfg, group.order)
    net = build_grid_net(ArmSpace.unit(cfg.dim), delta)
    count = -1
    if clique_stats:
        dom = dirichlet_domain(group, find_free_point(group, stream(cfg.base_seed, 3)))
        count = len(clique_cover(net, group, dom, rng=stream(cfg.base_seed, 4)))
    return Setup(cfg, env, group, delta, net, count, len(net))


def _replicate(args):
    setup, seed = args
    policy = setup.make_policy()
    t0 = time.perf_counter()
    trace = run_episode(setup.env, policy, setup.cfg.horizon, seed, setup.cfg.config_hash())
    return trace, (time.perf_counter() - t0) * 1000


_WORKER_SETUP = None


def _init_worker(cfg):
    # instances hold closures, so each worker rebuilds the (deterministic) setup
    global _WORKER_SETUP
    _WORKER_SETUP = prepare(cfg)


def _replicate_in_worker(seed):
    return _replicate((_WORKER_SETUP, seed))


def run_replications(setup: Setup, seeds=None, workers: int = 1):
    seeds = list(setup.cfg.seeds if seeds is None else seeds)
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(setup.cfg,)) as ex:
            out = list(ex.map(_replicate_in_worker, seeds))
    else:
        out = [_replicate((setup, s)) for s in seeds]
    return sorted(out, key=lambda r: r[0].seed)


def result_rows(setup: Setup, results) -> list[dict]:
    cfg = setup.cfg
    if cfg.algo == "invariant-ucb1":
        order = _group_order_of(cfg.group, cfg.dim)
    else:
        order = setup.group.order
    return [
        {
            "algo": cfg.algo,
            "group": cfg.group,
            "group_order": order,
            "delta": repr(float(setup.delta)),
            "n": cfg.horizon,
            "seed": trace.seed,
            "final_regret": repr(trace.final),
            "wall_ms": f"{ms:.1f}",
            "clique_count": setup.clique_count,
            "net_size": setup.net_size,
        }
        for trace, ms in results
    ]


# ---------------------------------------------------------------------- sweeps

@dataclass
class SweepConfig:
    base: ExperimentConfig
    groups: list[str] = field(default_factory=lambda: ["trivial"])
    deltas: list = field(default_factory=lambda: ["auto"])
    clique_stats: bool = False
    workers: int = 1


def sweep(sc: SweepConfig) -> list[dict]:
    """Cartesian product over groups, deltas and replication seeds; rows sorted deterministically."""
    rows = []
    for kind, delta in product(sc.groups, sc.deltas):
        cfg = dataclasses.replace(sc.base, group=kind, delta=delta)
        setup = prepare(cfg, clique_stats=sc.clique_stats)
        rows.extend(result_rows(setup, run_replications(setup, workers=sc.workers)))
    return sorted(rows, key=lambda r: (r["algo"], r["group_order"], r["group"], float(r["delta"]), r["seed"]))


def summarize(rows: list[dict]) -> list[dict]:
    """Mean and standard error of the final regret per (algo, group, delta) cell."""
    cells: dict[tuple, list[float]] = {}
    for r in rows:
        cells.setdefault((r["algo"], r["group"], r["group_order"], r["delta"]), []).append(float(r["final_regret"]))
    out = []
    for (algo, group, order, delta), vals in cells.items():
        v = np.asarray(vals)
        se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
        out.append({"algo": algo, "group": group, "group_order": order, "delta": delta,
                    "reps": len(v), "mean_regret": float(v.mean()), "stderr": se})
    return out


def rows_to_csv(rows: list[dict], columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writeheader()
    for r in rows:
        w.writerow({c: r[c] for c in columns})
    return buf.getvalue()


def write_csv(rows: list[dict], path, columns=CSV_COLUMNS):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows, columns))


def strip_timing(csv_text: str) -> str:
    """CSV text with the timing columns removed, for determinism comparisons."""
    reader = csv.DictReader(io.StringIO(csv_text))
    cols = [c for c in reader.fieldnames if c not in TIMING_COLUMNS]
    return rows_to_csv(list(reader), cols)


def fit_scaling(table, x_field: str, y_field: str) -> tuple[float, float]:
    """Least-squares slope (and its standard error) of ``log y`` against ``log x``."""
    if isinstance(table, dict):
        xs, ys = table[x_field], table[y_field]
    else:
        xs = [r[x_field] for r in table]
        ys = [r[y_field] for r in table]
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    if x.size < 2 or np.ptp(x) == 0:
        raise ValueError("need at least two distinct x values to fit a slope")
    if x.size == 2:
        slope = (y[1] - y[0]) / (x[1] - x[0])
        return float(slope), 0.0
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr)


# ------------------------------------------------------- covering-ratio checks

@dataclass
class LemmaReport:
    group: str
    group_order: int
    dim: int
    rows: list[dict]
    band: float
    checks: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def lines(self) -> list[str]:
        out = [f"group={self.group} |G|={self.group_order} d={self.dim}"]
        for r in self.rows:
            out.append(
                "delta={delta:<8g} |V|={V:<6d} |V_D|={VD:<5d} cliques={cliques:<5d} |W|={W:<5d} "
                "r_VD={r_VD:.4f} r_clq={r_cliques:.4f} r_W={r_W:.4f}".format(**r)
            )
        for k, ok in self.checks.items():
            out.append(f"{k:28s} {'pass' if ok else 'FAIL'}")
        return out


LEMMA_COLUMNS = ("delta", "V", "VD", "cliques", "W", "r_VD", "r_cliques", "r_W")


def lemma_checks(group_kind: str, dim: int, deltas=(0.1, 0.05, 0.025), seed: int = 0,
                 band: float = 25.0, cover_fn=None) -> LemmaReport:
    """Ratios ``count * |G| * delta**d`` across a ladder of scales.

    Each ratio sequence passes when ``max/min <= band``.  The domain cover and
    the clique cover must also use at most ``2|V|/|G|`` vertices at the finest
    scale.  ``cover_fn(net, group, dom, delta)`` substitutes the clique cover.
    """
    group = make_group(group_kind, dim)
    G = group.order
    dom = dirichlet_domain(group, find_free_point(group, stream(seed, 3)))
    rows = []
    for delta in sorted(deltas, reverse=True):
        net = build_grid_net(group.space, delta)
        vd = vertices_covering_closure(net, group, dom, rng=stream(seed, 4))
        if cover_fn is None:
            cover = clique_cover(net, group, dom, delta, domain_vertices=vd)
        else:
            cover = cover_fn(net, group, dom, delta)
        if not check_partition(cover, len(net)):
            raise RuntimeError("clique cover is not a partition of the net")
        try:
            w = len(strict_packing_of_domain(dom, group, delta, rng=stream(seed, 5)))
        except ValueError:
            w = 0
        scale = G * delta ** dim
        rows.append({"delta": delta, "V": len(net), "VD": len(vd), "cliques": len(cover), "W": w,
                     "r_VD": len(vd) * scale, "r_cliques": len(cover) * scale, "r_W": w * scale})

    def banded(key):
        v = np.array([r[key] for r in rows])
        return bool(v.min() > 0 and v.max() / v.min() <= band)

    finest = rows[-1]
    checks = {
        "domain_cover_band": banded("r_VD"),
        "clique_cover_band": banded("r_cliques"),
        "packing_band": banded("r_W"),
        "domain_cover_fraction": finest["VD"] <= finest["V"] and finest["VD"] / finest["V"] <= 2 / G,
        "clique_cover_fraction": finest["cliques"] / finest["V"] <= 2 / G,
    }
    return LemmaReport(group_kind, G, dim, rows, band, checks)
