import numpy as np
import pytest

from landscape_bo.doe import Design


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_design(X, y):
    return Design(np.asarray(X, dtype=float), np.asarray(y, dtype=float))
