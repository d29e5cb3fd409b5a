import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_series
from cpseg import (GeometricPrior, KPrior, PointProcess, enumerate_exact_posterior,
                   integrated_autocorrelation_time, modal_k, sensitivity_sweep, summarize, tv_distance)
from cpseg.analysis import autocorrelation, n_segmentations
from cpseg.core import TimeSeries, build_stats
from cpseg.models import GaussianCommonVariance
from cpseg.sampler import ChainOutput


def _chain(taus, n, hyper=None):
    m = len(taus)
    return ChainOutput(n=n, sweep=np.arange(1, m + 1), k=np.array([len(t) for t in taus]),
                       taus=list(taus), p=np.full(m, np.nan), hyper=hyper or {},
                       log_post=np.zeros(m), acceptance={}, move_counts={})


def test_enumeration_counts_and_normalisation():
    stats, model = make_series("poisson", seed=0, n=3)
    ex = enumerate_exact_posterior(stats, model, GeometricPrior(0.4), KPrior.uniform(2))
    assert len(ex.segmentations) == 4
    assert ex.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert ex.k_dist.sum() == pytest.approx(1.0, abs=1e-12)
    assert ex.pos_prob @ np.ones(2) == pytest.approx(ex.k_dist @ np.arange(3), abs=1e-12)


def test_flat_data_with_strong_no_change_prior_concentrates_on_zero():
    stats = build_stats(TimeSeries(np.zeros(8), "real"))
    ex = enumerate_exact_posterior(stats, GaussianCommonVariance(), GeometricPrior(1e-4), KPrior.uniform(7))
    assert ex.k_dist[0] > 0.999


def test_enumeration_limit():
    stats = build_stats(TimeSeries(np.zeros(30), "real"))
    assert n_segmentations(30, 29) == 2 ** 29
    with pytest.raises(ValueError, match="limit"):
        enumerate_exact_posterior(stats, GaussianCommonVariance(), GeometricPrior(0.1), KPrior.uniform(29))


def test_tv_distance_forms():
    assert tv_distance({(1,): 0.5, (): 0.5}, {(): 1.0}) == pytest.approx(0.5)
    assert tv_distance([0.2, 0.8], [0.2, 0.3, 0.5]) == pytest.approx(0.5)
    assert tv_distance([1.0], [1.0]) == 0.0


def test_constant_chain_iact_is_capped():
    acf = autocorrelation(np.full(100, 3.0), 20)
    assert np.all(acf == 1.0)
    _, capped = integrated_autocorrelation_time(np.full(100, 3.0))
    assert capped


def test_iid_draws_have_unit_iact():
    x = np.random.default_rng(0).normal(size=100_000)
    iact, capped = integrated_autocorrelation_time(x)
    assert not capped
    assert iact == pytest.approx(1.0, abs=0.1)


def test_ar1_iact_matches_theory():
    rng = np.random.default_rng(1)
    phi, m = 0.6, 200_000
    x = np.empty(m)
    x[0] = 0.0
    z = rng.normal(size=m)
    for i in range(1, m):
        x[i] = phi * x[i - 1] + z[i]
    iact, _ = integrated_autocorrelation_time(x)
    assert iact == pytest.approx((1 + phi) / (1 - phi), rel=0.1)


def test_acf_matches_direct_biased_estimator():
    x = np.random.default_rng(2).normal(size=300)
    acf = autocorrelation(x, 5)
    d = x - x.mean()
    direct = [d[: 300 - h] @ d[h:] / (d @ d) for h in range(6)]
    np.testing.assert_allclose(acf, direct, atol=1e-12)


def test_pos_prob_of_fixed_changepoint():
    summ = summarize(_chain([(5,)] * 50, n=10))
    expected = np.zeros(9)
    expected[4] = 1.0
    np.testing.assert_array_equal(summ.pos_prob, expected)
    assert summ.iact_capped


def test_summary_of_oracle_weighted_chain_reproduces_oracle():
    stats, model = make_series("gaussian", seed=2, n=6)
    ex = enumerate_exact_posterior(stats, model, GeometricPrior(0.3), KPrior.uniform(5))
    # an "ideal" chain: each segmentation repeated in exact proportion
    reps = 2 ** 20
    counts = np.round(ex.probs * reps).astype(int)
    taus = [s for s, c in zip(ex.segmentations, counts) for _ in range(c)]
    summ = summarize(_chain(taus, 6))
    weights = counts / counts.sum()
    k_dist = np.bincount([len(s) for s in ex.segmentations], weights=weights, minlength=6)
    np.testing.assert_allclose(summ.k_dist, k_dist[: summ.k_dist.size], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(1, 11), max_size=5, unique=True), min_size=1, max_size=40))
def test_pos_prob_sums_to_mean_k(segs):
    taus = [tuple(sorted(s)) for s in segs]
    summ = summarize(_chain(taus, 12))
    assert summ.pos_prob.sum() == pytest.approx(summ.mean_k)
    assert summ.k_dist.sum() == pytest.approx(1.0)
    assert summ.acf[0] == pytest.approx(1.0)
    assert np.all((summ.pos_prob >= 0) & (summ.pos_prob <= 1))


def test_summarize_rejects_empty_chain():
    with pytest.raises(ValueError):
        summarize(_chain([], 5))


def test_summarize_reports_hyper_means():
    summ = summarize(_chain([(), (2,)], 5, hyper={"sigma": np.array([1.0, 3.0])}))
    assert summ.hyper_means == {"sigma": 2.0}


def test_modal_k_ties_go_to_smaller_k():
    assert modal_k([0.1, 0.45, 0.45]) == (1, True)
    assert modal_k([0.1, 0.6, 0.3]) == (1, False)


def test_sweep_single_point_and_strong_shift():
    rng = np.random.default_rng(3)
    y = np.r_[rng.normal(0, 1, 40), rng.normal(12, 1, 40)]
    stats = build_stats(TimeSeries(y, "real"))
    model = GaussianCommonVariance(1.0, 6.0, 10.0)
    one = sensitivity_sweep(stats, model, PointProcess.geometric(0.01), "p", [0.01], 2000,
                            np.random.default_rng(0))
    assert one.modal_k.tolist() == [1]
    wide = sensitivity_sweep(stats, model, PointProcess.geometric(0.01), "p",
                             [0.001, 0.005, 0.01, 0.02, 0.05], 5000, np.random.default_rng(0))
    assert set(wide.modal_k.tolist()) == {1}
    by_sigma = sensitivity_sweep(stats, model, PointProcess.geometric(0.01), "sigma", [0.9, 1.1],
                                 2000, np.random.default_rng(0))
    assert len(by_sigma.grid) == len(by_sigma.modal_k) == 2
    with pytest.raises(ValueError):
        sensitivity_sweep(stats, model, PointProcess.geometric(0.01), "p", [], 10, np.random.default_rng(0))
