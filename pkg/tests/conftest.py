import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_iv_instance(rng, n, p, d, weight_scale=1.0):
    """Well-conditioned random (y, x, z, w) with x correlated to z.

    Used as the shared raw material for oracle comparisons; w is an
    arbitrary bounded weight vector, not tied to any learner.
    """
    z = rng.normal(size=(n, d))
    coef = rng.normal(size=(d, p))
    x = z @ coef + rng.normal(size=(n, p))
    beta = rng.normal(size=p)
    y = x @ beta + rng.normal(size=n)
    w = np.clip(rng.normal(size=n) * weight_scale, -1.0, 1.0)
    return y, x, z, w
