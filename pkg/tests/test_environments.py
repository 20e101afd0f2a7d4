import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandit_lab.environments import (
    BASE_LEVEL,
    InstanceError,
    RewardInstance,
    make_bump_instance,
    make_centered_bump,
    make_constant_f0,
    make_invariant_finite_instance,
    make_smooth_invariant_instance,
    reward_from_uniform,
    sample_reward,
    strict_packing_of_domain,
    verify_instance,
)
from bandit_lab.group_action import dirichlet_domain, find_free_point, make_group, orbit
from bandit_lab.policies import cyclic_shift_group


def packing(kind, d, delta, seed=0):
    g = make_group(kind, d)
    rng = np.random.default_rng(seed)
    dom = dirichlet_domain(g, find_free_point(g, rng))
    return g, dom, strict_packing_of_domain(dom, g, delta, rng=rng)


def test_constant_instance(rng):
    f0 = make_constant_f0(make_group("dihedral8", 2))
    xs = rng.random((100, 2))
    assert np.all(f0.mean(xs) == BASE_LEVEL)
    assert f0.mean(np.array([0.3, 0.3])) == pytest.approx(1 / 3)
    rep = verify_instance(f0, pairs=1000, samples=1000, rng=0)
    assert rep.passed and rep.max_lipschitz_ratio == 0.0


def test_reflection_packing_example():
    g, dom, pack = packing("reflect1d", 1, 0.1)
    assert len(pack) >= 2
    x0 = dom.base_point[0]
    for p in pack.points:
        # domain is [0, 0.5) or (0.5, 1] depending on the base point
        inner = p[0] if x0 < 0.5 else 1 - p[0]
        assert 0.1 < inner < 0.4


@pytest.mark.parametrize("kind,d,delta", [("reflect1d", 1, 0.05), ("dihedral8", 2, 0.05), ("trivial", 2, 0.1),
                                          ("permutation", 3, 0.1)])
def test_packing_is_strict(kind, d, delta):
    g, dom, pack = packing(kind, d, delta)
    pts = pack.points
    gaps = np.linalg.norm(pts[:, None] - pts[None], axis=-1)[np.triu_indices(len(pts), 1)]
    assert (gaps > delta).all()
    assert (dom.boundary_distance(pts) > delta).all()
    # orbit balls of radius delta/2 from distinct packing points never meet
    imgs = np.concatenate([g.images(p) for p in pts])
    owner = np.repeat(np.arange(len(pts)), g.order)
    dist = np.linalg.norm(imgs[:, None] - imgs[None], axis=-1)
    assert (dist[owner[:, None] != owner[None]] > delta).all()


def test_boundary_distance_matches_bisector_reflection():
    g, dom, _ = packing("reflect1d", 1, 0.1)
    xs = np.linspace(0, 1, 101)[:, None]
    # exact distance to the nearest of {0, 0.5, 1}
    ref = np.minimum(np.abs(xs[:, 0] - 0.5), np.minimum(xs[:, 0], 1 - xs[:, 0]))
    inside = np.array([(x < 0.5) == (dom.base_point[0] < 0.5) for x in xs[:, 0]])
    assert np.allclose(dom.boundary_distance(xs)[inside], ref[inside])


def test_packing_too_large_delta():
    g = make_group("reflect1d", 1)
    dom = dirichlet_domain(g, [0.2])
    with pytest.raises(InstanceError):
        strict_packing_of_domain(dom, g, 0.6, rng=0, budget=200)
    with pytest.raises(InstanceError):
        strict_packing_of_domain(dom, g, 0.0)


def test_bump_values():
    g, dom, pack = packing("dihedral8", 2, 0.1)
    inst = make_bump_instance(pack, 0, g)
    i = pack.points[0]
    assert inst.mean(i) == pytest.approx(1 / 3 + 0.05, abs=1e-12)
    assert inst.optimum_value == pytest.approx(1 / 3 + 0.05)
    for im in g.images(i):
        assert inst.mean(im) == pytest.approx(1 / 3 + 0.05, abs=1e-12)
    # a point at distance delta/2 from every orbit point sits at the base level
    step = np.array([0.05, 0.0])
    assert inst.mean(i + step) == pytest.approx(1 / 3, abs=1e-12)


def test_bump_formula_oracle(rng):
    g, dom, pack = packing("dihedral8", 2, 0.1, seed=4)
    inst = make_bump_instance(pack, 1, g)
    centres = g.images(pack.points[1])
    xs = np.concatenate([rng.random((2000, 2)), centres[rng.integers(8, size=2000)] + rng.normal(0, 0.03, (2000, 2))])
    xs = np.clip(xs, 0, 1)
    ref = []
    for x in xs:
        near = min(math.dist(x, c) for c in centres)
        ref.append(1 / 3 + 0.05 - near if near < 0.05 else 1 / 3)
    assert np.allclose(inst.mean(xs), ref, atol=1e-12)


def test_bump_rejects_bad_inputs():
    g, dom, pack = packing("reflect1d", 1, 0.1)
    with pytest.raises(InstanceError):
        make_bump_instance(pack, len(pack), g)
    with pytest.raises(InstanceError):
        make_centered_bump(g, [0.45], 0.1)


def test_bump_rejects_delta_outside_range():
    g = make_group("trivial", 1)
    dom = dirichlet_domain(g, [0.5])
    from bandit_lab.environments import StrictPacking

    with pytest.raises(InstanceError):
        make_bump_instance(StrictPacking(np.array([[0.5]]), 0.7, dom), 0, g)


def test_bump_overlap_detected():
    from bandit_lab.environments import StrictPacking

    g = make_group("reflect1d", 1)
    dom = dirichlet_domain(g, [0.2])
    # 0.47 and its mirror 0.53 are only 0.06 apart
    with pytest.raises(InstanceError):
        make_bump_instance(StrictPacking(np.array([[0.47]]), 0.1, dom), 0, g)


@pytest.mark.parametrize("kind,d", [("reflect1d", 1), ("dihedral8", 2), ("permutation", 3)])
def test_bump_instance_verifies(kind, d):
    g, dom, pack = packing(kind, d, 0.1)
    inst = make_bump_instance(pack, 0, g)
    rep = verify_instance(inst, rng=1, points=g.images(pack.points[0]))
    assert rep.passed
    assert rep.max_value == pytest.approx(1 / 3 + 0.05, abs=1e-12)


def test_scaled_bump_fails_lipschitz():
    g, dom, pack = packing("dihedral8", 2, 0.1)
    inst = make_bump_instance(pack, 0, g)
    tripled = RewardInstance(lambda x: 1 / 3 + 3 * (inst.mean_fn(x) - 1 / 3), g, {}, 1 / 3 + 0.15)
    rep = verify_instance(tripled, rng=1, points=g.images(pack.points[0]))
    assert not rep.lipschitz_ok and not rep.passed


def test_non_invariant_fails():
    g = make_group("reflect1d", 1)
    tilted = RewardInstance(lambda x: 0.2 + 0.5 * x[:, 0], g, {}, 0.7)
    rep = verify_instance(tilted, rng=0)
    assert rep.lipschitz_ok and not rep.invariance_ok


def test_ensemble_disjointness(rng):
    g, dom, pack = packing("dihedral8", 2, 0.05)
    assert len(pack) >= 3
    members = [make_bump_instance(pack, i, g) for i in range(len(pack))]
    for j in range(len(pack)):
        centres = g.images(pack.points[j])
        dirs = rng.normal(size=(500, 2))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        xs = centres[rng.integers(g.order, size=500)] + dirs * (0.025 * rng.random(500))[:, None]
        for i, f in enumerate(members):
            if i != j:
                assert np.all(f.mean(xs) == BASE_LEVEL)


def test_bump_minus_f0_bounded(rng):
    g, dom, pack = packing("reflect1d", 1, 0.1)
    f = make_bump_instance(pack, 1, g)
    xs = np.linspace(0, 1, 100_001)[:, None]
    diff = f.mean(xs) - 1 / 3
    assert diff.max() <= 0.05 + 1e-15
    assert diff.max() == pytest.approx(0.05, abs=1e-5)


def test_smooth_instance_properties():
    g = make_group("dihedral8", 2)
    inst = make_smooth_invariant_instance(g, rng=0)
    rep = verify_instance(inst, rng=2)
    assert rep.passed
    assert 0.1 <= rep.min_value and rep.max_value <= 0.9
    axes = np.linspace(0, 1, 1000)
    grid = np.stack([a.ravel() for a in np.meshgrid(axes, axes)], axis=1)
    assert inst.optimum_value >= inst.mean(grid).max() - 1e-3
    assert inst.optimum_value <= inst.mean(grid).max() + inst.certification_gap


def test_smooth_trivial_group():
    g = make_group("trivial", 1)
    inst = make_smooth_invariant_instance(g, rng=5)
    assert verify_instance(inst, rng=0).passed
    assert inst.descriptor["group"] == "trivial"


def test_smooth_unknown_kind():
    with pytest.raises(InstanceError):
        make_smooth_invariant_instance(make_group("trivial", 1), kind="cubic")


def test_sample_reward_extremes(rng):
    for m in (0.0, 1.0):
        inst = RewardInstance(lambda x, m=m: np.full(len(x), m), make_group("trivial", 1), {}, m)
        assert {sample_reward(inst, [0.5], rng) for _ in range(200)} == {m}


def test_bernoulli_mean(rng):
    f0 = make_constant_f0()
    ys = np.array([sample_reward(f0, [0.5], rng) for _ in range(100_000)])
    assert set(np.unique(ys)) <= {0.0, 1.0}
    assert abs(ys.mean() - 1 / 3) <= 3 * math.sqrt((1 / 3) * (2 / 3) / 1e5)


def test_truncated_gaussian_noise(rng):
    inst = make_constant_f0().with_noise("truncated_gaussian", sigma=0.2)
    ys = np.array([reward_from_uniform(inst, 0.3, u) for u in rng.random(50_000)])
    assert ys.min() >= 0.0 and ys.max() <= 0.6
    assert abs(ys.mean() - 0.3) < 3 * ys.std() / math.sqrt(len(ys))
    with pytest.raises(InstanceError):
        make_constant_f0().with_noise("cauchy")


def test_finite_instance_is_orbit_constant():
    perms = cyclic_shift_group(12, 3)
    inst = make_invariant_finite_instance(perms, rng=0)
    for p in perms:
        assert np.allclose(inst.means[p], inst.means)
    assert inst.optimum_value == inst.means.max()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), delta=st.floats(0.03, 0.12))
def test_bump_peak_property(seed, delta):
    g, dom, pack = packing("dihedral8", 2, delta, seed=seed)
    inst = make_bump_instance(pack, 0, g)
    assert abs(inst.mean(pack.points[0]) - (1 / 3 + delta / 2)) <= 1e-6
    assert len(orbit(g, pack.points[0])) == g.order
