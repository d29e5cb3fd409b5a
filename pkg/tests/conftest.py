import numpy as np
import pytest

from cpseg import (BernoulliBeta, DataKind, GaussianCommonVariance, PoissonGamma, TimeSeries,
                   build_stats)


def make_series(kind: str, seed: int, n: int = 10):
    """Small series with one or two visible shifts, used by oracle tests."""
    rng = np.random.default_rng(seed)
    half = n // 2
    if kind == "poisson":
        y = np.r_[rng.poisson(1.0, half), rng.poisson(7.0, n - half)]
        return build_stats(TimeSeries(y, DataKind.COUNTS)), PoissonGamma(1.0, 1.0)
    if kind == "bernoulli":
        y = np.r_[rng.random(half) < 0.05, rng.random(n - half) < 0.95].astype(int)
        return build_stats(TimeSeries(y, DataKind.BINARY)), BernoulliBeta(0.5, 0.5)
    y = np.r_[rng.normal(0.0, 1.0, half), rng.normal(4.0, 1.0, n - half)]
    return build_stats(TimeSeries(y, DataKind.REAL)), GaussianCommonVariance(1.0, 2.0, 2.0)


MODEL_KINDS = ["poisson", "bernoulli", "gaussian"]


@pytest.fixture(params=MODEL_KINDS)
def small_instance(request):
    return make_series(request.param, seed=3, n=8)
