import numpy as np
import pytest

from kplab.geometry import GroupPoint


def batch_points(rng, n, m, box=2.0):
    """Uniform batch of group points in a centered box."""
    return GroupPoint(
        rng.uniform(-box, box, (n, m)),
        rng.uniform(-box, box, (n, m)),
        rng.uniform(-box, box, n),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
