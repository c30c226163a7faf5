import numpy as np
import pytest
from hypothesis import settings

from ericksen.flow import normalize_rows

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_unit(rng, n, d):
    return normalize_rows(rng.standard_normal((n, d)))


def random_state(rng, nv, d, lo=-0.45, hi=0.95):
    return rng.uniform(lo, hi, nv), random_unit(rng, nv, d)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
