import numpy as np
import pytest

from macpolar import Mac, PointChannel


def random_mac(rng, q, outputs):
    rows = rng.dirichlet(np.ones(outputs), size=q * q)
    return Mac(q=q, probs=rows.reshape(q, q, outputs))


def random_point_channel(rng, q, outputs):
    return PointChannel(q=q, probs=rng.dirichlet(np.ones(outputs), size=q))


def mac_ensemble(seed=20260809, count=50):
    """Seeded ensemble of small random MACs with q in {2, 3}, |Y| <= 5."""
    rng = np.random.default_rng(seed)
    macs = []
    for _ in range(count):
        q = int(rng.choice([2, 3]))
        outputs = int(rng.integers(2, 6))
        macs.append(random_mac(rng, q, outputs))
    return macs


def point_ensemble(seed=20260810, count=50):
    rng = np.random.default_rng(seed)
    chans = []
    for _ in range(count):
        q = int(rng.choice([2, 3]))
        outputs = int(rng.integers(2, 6))
        chans.append(random_point_channel(rng, q, outputs))
    return chans


@pytest.fixture(scope="session")
def macs50():
    return mac_ensemble()


@pytest.fixture(scope="session")
def points50():
    return point_ensemble()
