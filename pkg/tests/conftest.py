import numpy as np
import pytest

from vortexfmm.model import Particle


def positions_of(particles) -> np.ndarray:
    return np.array([(p.x, p.y) for p in particles])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_particles(rng, n, box=(0.0, 1.0), sigma=0.01):
    lo, hi = box
    xy = rng.uniform(lo, hi, size=(n, 2))
    gamma = rng.uniform(-1.0, 1.0, n)
    return [Particle(float(x), float(y), float(g), sigma) for (x, y), g in zip(xy, gamma)]
