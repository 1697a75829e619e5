import numpy as np
import pytest


def random_symmetric(rng, d, scale=1.0):
    a = rng.standard_normal((d, d)) * scale
    return 0.5 * (a + a.T)


def haar(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def random_projector(rng, d, r):
    u = haar(rng, d)[:, :r]
    p = u @ u.T
    return 0.5 * (p + p.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
