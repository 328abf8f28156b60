import numpy as np
import pytest
from hypothesis import settings

from statfrob.expfam import random_family

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def sweep(count, seed=0, beta_range=2.0):
    """Deterministic (family, beta) pairs drawn the same way as the acceptance sweep."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        fam = random_family(rng)
        beta = rng.uniform(-beta_range, beta_range, fam.n)
        out.append((fam, beta))
    return out
