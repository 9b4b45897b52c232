import numpy as np
import pytest

from oodscore import ClassifierHead


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_head(rng, c, d, scale=1.0):
    return ClassifierHead(
        weights=rng.normal(0.0, scale, size=(c, d)),
        bias=rng.normal(0.0, 0.1, size=c),
    )


def random_fixture(rng, c=4, d=8, n_train=60, n_test=25, nonneg=False):
    """Random head plus train/test features; mixed-sign unless nonneg."""
    head = random_head(rng, c, d)
    train = rng.normal(0.0, 1.0, size=(n_train, d))
    test = rng.normal(0.0, 1.0, size=(n_test, d))
    if nonneg:
        train, test = np.abs(train), np.abs(test)
    return head, train, test
