import numpy as np
import pytest
from scipy.spatial.transform import Rotation


def random_psd(rng, dim=3, scale=3.0):
    """Hermitian PSD matrix built from random eigenvalues and a random unitary."""
    M = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    Q, _ = np.linalg.qr(M)
    evals = rng.uniform(0.0, 1.0, size=dim)
    D = (Q * evals) @ Q.conj().T
    return scale * D / evals.sum()


def random_bloch(rng, lo=0.05, hi=0.5):
    v = rng.normal(size=3)
    return rng.uniform(lo, hi) * v / np.linalg.norm(v)


def random_rotation(rng):
    return Rotation.random(random_state=rng).as_matrix()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
