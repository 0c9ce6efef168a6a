import numpy as np
import pytest

from slicekit.dataset import matrix_from_codes
from slicekit.fixtures import planted_matrix
from slicekit.ranking import RankingSpec


def tiny_matrix(seed=0, n=400, m=5):
    """Small random binary matrix with a weakly planted outcome, cheap enough
    for per-test construction."""
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 2, size=(n, m))
    p = np.where(codes[:, 0] & codes[:, 1], 0.8, 0.1)
    y = (rng.random(n) < p).astype(int)
    return matrix_from_codes(codes, outcomes={"target": y}, seed=seed)


@pytest.fixture(scope="session")
def small_matrix():
    return tiny_matrix()


@pytest.fixture(scope="session")
def planted_20k():
    return planted_matrix(20_000, 30, 5, seed=0)


@pytest.fixture(scope="session")
def rate_specs():
    return (
        RankingSpec(kind="outcome-rate-high", outcome="target", weight=2),
        RankingSpec(kind="group-size", weight=1),
    )
