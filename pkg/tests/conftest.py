import numpy as np
import pytest

from bandit_lab.geometry import ArmSpace, DeltaNet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def explicit_net(points, delta, dim=1):
    """Hand-built net over the unit box (for the small worked examples)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != dim:
        pts = pts.reshape(-1, dim)
    return DeltaNet(delta, pts, ArmSpace.unit(dim), np.full(dim, np.nan))
