import numpy as np
import pytest

from adabatch import Objective, make_partitioning, make_synthetic, single_partition


def ridge_instance(n, d, seed, lam=0.3, noise=0.1, x_scale=1.0, density=1.0):
    ds, _ = make_synthetic(n, d, seed=seed, noise=noise, density=density, x_scale=x_scale)
    return Objective(ds, "ridge", lam)


def logistic_instance(n, d, seed, lam=0.1):
    ds, _ = make_synthetic(n, d, seed=seed, noise=0.0)
    ds.labels[:] = np.where(ds.labels >= np.median(ds.labels), 1.0, -1.0)
    return Objective(ds, "logistic", lam)


@pytest.fixture(scope="session")
def small_ridge():
    """n=8, d=5 ridge instance; small enough to enumerate every sampling law."""
    return ridge_instance(8, 5, seed=7, lam=0.3, noise=0.2)


@pytest.fixture(scope="session")
def small_partitioning():
    return make_partitioning(8, sizes=[5, 3])


@pytest.fixture(scope="session")
def single_part8():
    return single_partition(8)
