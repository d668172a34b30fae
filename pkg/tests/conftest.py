import itertools
import math

import numpy as np
import pytest

from weingarten import sphere, subsolution

CAP = math.pi / 3
SPHERE_CENTER = (0.0, 0.0, 0.3)
SPHERE_RADIUS = 1.0


def elem_sym_enumerate(values, k):
    """Brute-force elementary symmetric polynomial (test oracle, n <= 5ish)."""
    values = list(values)
    if k == 0:
        return 1.0
    return float(sum(math.prod(c) for c in itertools.combinations(values, k)))


def elem_sym_norm_enumerate(values, k):
    return elem_sym_enumerate(values, k) / math.comb(len(values), k)


def random_admissible_matrix(rng, n, lo=0.2, hi=5.0):
    """Symmetric matrix with eigenvalues log-uniform in [lo, hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.exp(rng.uniform(np.log(lo), np.log(hi), size=n))
    return (q * lam) @ q.T


def boundary_bump(grid):
    """Smooth radial bump, 1 at the center, 0 on the boundary ring."""
    rmax = np.tan(grid.cap_radius / 2)
    return (1.0 - (np.linalg.norm(grid.y, axis=1) / rmax) ** 2) ** 2


@pytest.fixture(scope="session")
def grid16():
    return sphere.build_grid(CAP, 16, 32)


@pytest.fixture(scope="session")
def grid32():
    return sphere.build_grid(CAP, 32, 64)


@pytest.fixture(scope="session")
def grid64():
    return sphere.build_grid(CAP, 64, 128)


@pytest.fixture(scope="session")
def offcenter_sphere():
    return subsolution.EnclosingSphere(SPHERE_CENTER, SPHERE_RADIUS)


@pytest.fixture(scope="session")
def centered_sphere_r2():
    return subsolution.EnclosingSphere((0.0, 0.0, 0.0), 2.0)
