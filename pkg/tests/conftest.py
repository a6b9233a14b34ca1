import numpy as np
import pytest

from cusptrack import (
    Circle,
    block_n4_model,
    block_n5_model,
    phase_pi_model,
    phase_zero_model,
    sqrt_model,
    tilted_model,
)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture(scope="session")
def fixtures_2x2():
    return {
        "sqrt": (sqrt_model(), Circle((0.0, 0.0), 1.0)),
        "phase_zero": (phase_zero_model(0.25), Circle((0.0, 0.0), 2.0)),
        "phase_pi": (phase_pi_model(0.1), Circle((0.0, 0.0), 2.0)),
    }


def match_distance(a, b):
    """Max pairwise distance under the optimal matching of two value sets."""
    from scipy.optimize import linear_sum_assignment

    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())
