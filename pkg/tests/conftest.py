import numpy as np
import pytest

from polysideband.drive import PulseSpec


def random_spec(rng, n, m=10, eta=0.05, f_tg=0.1, scale=0.6, delta=None):
    """Pulse with O(1) carrier and smaller side tones, all random."""
    f = scale * rng.uniform(-1.0, 1.0, 2 * n + 1)
    f[n] = rng.uniform(1.0, 2.5)
    if delta is None:
        delta = rng.uniform(0.05, 0.5)
    etas = eta * rng.uniform(0.8, 1.2, 2 * n + 1)
    return PulseSpec(m=m, n=n, delta=delta, f=f, eta=etas, f_tg=f_tg)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
