import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandit_lab.geometry import (
    ArmSpace,
    DeltaNet,
    GeometryError,
    build_grid_net,
    covering_check,
    distance,
    proposition1_bounds,
    spacing_constant,
    unit_ball_volume,
)


def test_distance_small_cases():
    assert distance([0, 0], [0, 0]) == 0.0
    assert distance([0, 0], [3, 4]) == 5.0


def test_distance_matches_componentwise_sum(rng):
    for _ in range(20):
        p, q = rng.random(5), rng.random(5)
        ref = math.sqrt(sum((a - b) ** 2 for a, b in zip(p.tolist(), q.tolist())))
        assert abs(distance(p, q) - ref) <= 1e-12


def test_distance_dimension_mismatch():
    with pytest.raises(GeometryError):
        distance([0, 0], [0, 0, 0])


def test_triangle_inequality(rng):
    x, y, z = rng.random((3, 10_000, 3))
    dxy = np.linalg.norm(x - y, axis=1)
    dyz = np.linalg.norm(y - z, axis=1)
    dxz = np.linalg.norm(x - z, axis=1)
    assert (dxz <= dxy + dyz + 1e-12).all()


def test_arm_space_rejects_degenerate_box():
    with pytest.raises(GeometryError):
        ArmSpace(np.array([0.0, 1.0]), np.array([1.0, 1.0]))


def test_grid_net_unit_square_half():
    net = build_grid_net(ArmSpace.unit(2), 0.5)
    assert len(net) == 4
    # nominal spacing sqrt(2)/2 gives ceil(1/0.707) = 2 cells per axis
    assert np.allclose(net.spacing, 0.5)
    assert np.allclose(sorted(map(tuple, net.vertices)), [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)])


def test_grid_net_unit_interval_half():
    net = build_grid_net(ArmSpace.unit(1), 0.5)
    assert len(net) == 1
    assert net.vertices[0, 0] == pytest.approx(0.5)


def test_grid_net_cube_halving_ratio():
    space = ArmSpace.unit(3)
    # at coarse scales the per-axis ceil dominates (3 -> 5 cells at delta=0.4)
    for delta in (0.1, 0.05):
        ratio = len(build_grid_net(space, delta / 2)) / len(build_grid_net(space, delta))
        assert 6 <= ratio <= 10


@pytest.mark.parametrize("bad", [0.0, -0.1, float("inf"), float("nan")])
def test_grid_net_bad_delta(bad):
    with pytest.raises(GeometryError):
        build_grid_net(ArmSpace.unit(2), bad)


def test_covering_check_four_vertex_net():
    net = build_grid_net(ArmSpace.unit(2), 0.5)
    rep = covering_check(net, 10_000, rng=0)
    assert rep.passed
    assert rep.max_min_distance <= 0.5


def test_covering_check_detects_missing_vertex():
    net = build_grid_net(ArmSpace.unit(2), 0.05)
    holed = DeltaNet(net.delta, np.delete(net.vertices, len(net) // 2, axis=0), net.space, net.spacing)
    assert not covering_check(holed, 20_000, rng=1).passed


def test_covering_check_zero_samples():
    rep = covering_check(build_grid_net(ArmSpace.unit(1), 0.1), 0)
    assert rep.passed and rep.max_min_distance == 0.0


@pytest.mark.parametrize("d,delta", [(1, 0.1), (2, 0.07), (3, 0.2)])
def test_covering_check_own_delta_many_samples(d, delta):
    assert covering_check(build_grid_net(ArmSpace.unit(d), delta), 100_000, rng=d).passed


def test_volume_bracket_examples():
    lo, hi = proposition1_bounds(ArmSpace.unit(1), 0.1)
    assert lo == pytest.approx(5.0) and hi == pytest.approx(15.0)
    lo, hi = proposition1_bounds(ArmSpace.unit(2), 0.1)
    assert lo == pytest.approx(100 / math.pi) and hi == pytest.approx(900 / math.pi)


def test_volume_bracket_halving():
    for d in (1, 2, 3):
        a, _ = proposition1_bounds(ArmSpace.unit(d), 0.2)
        b, _ = proposition1_bounds(ArmSpace.unit(d), 0.1)
        assert b / a == pytest.approx(2 ** d)


def test_unit_ball_volume():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


@settings(max_examples=60, deadline=None)
@given(d=st.integers(1, 3), delta=st.floats(0.03, 0.9))
def test_grid_net_properties(d, delta):
    space = ArmSpace.unit(d)
    net = build_grid_net(space, delta)
    assert space.contains(net.vertices).all()
    # the realised cell half-diagonal never exceeds delta
    assert 0.5 * np.linalg.norm(net.spacing) <= delta + 1e-12
    lower, _ = proposition1_bounds(space, delta)
    assert lower <= spacing_constant(d) * len(net) + 1e-9


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 3), a=st.floats(0.03, 0.9), b=st.floats(0.03, 0.9))
def test_vertex_count_monotone_in_delta(d, a, b):
    lo, hi = sorted((a, b))
    space = ArmSpace.unit(d)
    assert len(build_grid_net(space, lo)) >= len(build_grid_net(space, hi))
