import numpy as np
import pytest

from hameo import geometry as geo


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_sphere():
    return geo.sphere((16, 16))


def random_sphere_points(rng, n):
    p = rng.normal(size=(n, 3))
    return p / np.linalg.norm(p, axis=-1, keepdims=True)


def random_disc_points(rng, n, radius=1.0):
    r = radius * np.sqrt(rng.uniform(size=n))
    th = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(th), r * np.sin(th)], -1)
