import numpy as np
import pytest

from oodcodesign.trace_eval import Trace


def random_trace(rng, n, *, period=250.0, miss_rate=0.2, tied=False):
    """Small trace with occasional deadline misses and, optionally, tied scores."""
    pos = rng.uniform(size=n) < 0.5
    ood = rng.uniform(size=n) < 0.3
    if tied:
        ec = rng.integers(0, 6, size=n) / 5
        oo = rng.integers(0, 6, size=n) / 5
    else:
        ec, oo = rng.uniform(size=(2, n))
    t_ood = rng.uniform(1, period * 0.5, size=n)
    t_ec = rng.uniform(1, period * 0.5, size=n)
    late = rng.uniform(size=n) < miss_rate
    t_ec[late] += period
    very_late = late & (rng.uniform(size=n) < 0.3)
    t_ood[very_late] += period
    return Trace(pos, ood, ec, oo, t_ec, t_ood)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
