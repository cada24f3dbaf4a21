import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240 + 7)


def random_complex(rng, *shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_hermitian(rng, n, scale=1.0, shape=()):
    a = random_complex(rng, *shape, n, n, scale=scale)
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def random_positive(rng, n, shape=(), spread=1.0):
    """Random Hermitian positive-definite matrices with O(1) conditioning."""
    a = random_complex(rng, *shape, n, n, scale=spread)
    return a @ np.conj(np.swapaxes(a, -1, -2)) + 0.5 * np.eye(n)
