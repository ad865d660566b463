import numpy as np
import pytest

from hankelid import (
    Dataset,
    MarglikProblem,
    NoiseModel,
    SplineHyper,
    SubspaceBasis,
    build_kernel_system,
    build_weights,
    hankel_dims,
)
from hankelid.model import regressor_block


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_orthogonal(rng, n):
    return np.linalg.qr(rng.standard_normal((n, n)))[0]


def random_marglik_problem(rng, p=None, m=None, T=None, N=None, identity_weights=True):
    """Small random instance of the marginal-likelihood problem.

    Dimensions default to draws with p, m <= 2, T <= 8, N <= 30.
    Returns (problem, lam) with lam strictly positive.
    """
    p = p if p is not None else int(rng.integers(1, 3))
    m = m if m is not None else int(rng.integers(1, 3))
    T = T if T is not None else int(rng.integers(2, 9))
    N = N if N is not None else int(rng.integers(T * m + 5, 31))
    u = rng.standard_normal((N, m))
    y = rng.standard_normal((N, p))
    d = Dataset(u, y)
    dims = hankel_dims(T, p, m)
    pr = p * dims.r
    basis = SubspaceBasis(random_orthogonal(rng, pr), int(rng.integers(0, pr + 1)), np.zeros(pr))
    weights = build_weights(d, dims, "identity" if identity_weights else "empirical")
    hp = SplineHyper(c=float(rng.uniform(0.5, 2.0)), beta=float(rng.uniform(0.5, 0.95)))
    ks = build_kernel_system(hp, T, p, m, dims, weights, basis)
    noise = NoiseModel(rng.uniform(0.2, 2.0, size=p))
    pb = MarglikProblem(Y=y.T.ravel(), phi=regressor_block(u, T), noise=noise, ks=ks, m=m)
    lam = rng.uniform(0.1, 2.0, size=3)
    return pb, lam
