import numpy as np
import pytest

from ballconv.convolve import Kernel
from ballconv.layout import get_layout
from ballconv.moments import MomentVector, real_to_complex


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_real_moments(rng, N=6):
    """Random coefficient vector with the identically-zero b-block entries zeroed."""
    layout = get_layout(N)
    c = rng.normal(size=layout.dim)
    c[layout.n_entries + layout.m0_positions] = 0.0
    return MomentVector(layout, c)


def random_complex_moments(rng, N=6):
    return real_to_complex(random_real_moments(rng, N))


def random_kernel(rng, N=6):
    layout = get_layout(N)
    c = np.zeros(layout.dim)
    c[layout.m0_positions] = rng.normal(size=len(layout.m0_positions))
    return Kernel(MomentVector(layout, c))


def random_directions(rng, n):
    return rng.uniform(0, 2 * np.pi, n), np.arccos(rng.uniform(-1.0, 1.0, n))
