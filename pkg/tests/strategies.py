import numpy as np
from hypothesis import strategies as st

from statfrob.expfam import random_family


@st.composite
def family_and_beta(draw, beta_range=2.0):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    fam = random_family(rng)
    beta = rng.uniform(-beta_range, beta_range, fam.n)
    return fam, beta


@st.composite
def interior_probability(draw, size):
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=size, max_size=size))
    p = np.array(raw)
    return p / p.sum()
