import itertools
import math

import numpy as np
import pytest
from scipy.special import logsumexp

from conftest import make_series
from cpseg import (GeometricPrior, KPrior, NumericalConsistencyError, PointProcess,
                   RecursionSampleSet, SamplerConfig, compute_recursions, enumerate_exact_posterior,
                   independence_mcmc, sample_changepoints, tv_distance)
from cpseg.analysis import empirical_distribution
from cpseg.core import TimeSeries, ValidationError, build_stats
from cpseg.models import GaussianCommonVariance, PoissonGamma


def _brute_force_evidence(stats, model, proc):
    """Sum over segmentations of point-process prior x likelihood; the last
    segment is censored, so it contributes a survival term."""
    n = stats.n
    total = []
    for k in range(n):
        for seg in itertools.combinations(range(1, n), k):
            edges = (0, *seg, n)
            lp = 0.0
            for j, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
                g = proc.initial if j == 0 else proc
                lp += model.log_marginal(stats, a + 1, b)
                if b < n:
                    lp += float(g.log_pmf(b - a))
                else:
                    lp += float(g.log_survival(b - a - 1))
            total.append(lp)
    return logsumexp(total)


@pytest.mark.parametrize("kind", ["poisson", "bernoulli", "gaussian"])
@pytest.mark.parametrize("proc", [PointProcess.geometric(0.15), PointProcess.negbin(2.0, 0.4),
                                  PointProcess("negbin", 0.3, 1.5, first=PointProcess.geometric(0.5))])
def test_evidence_matches_enumeration(kind, proc):
    stats, model = make_series(kind, seed=4, n=9)
    table = compute_recursions(stats, model, proc)
    assert table.log_evidence == pytest.approx(_brute_force_evidence(stats, model, proc), abs=1e-10)


def test_geometric_process_equals_segmentation_prior_times_uniform_k():
    stats, model = make_series("gaussian", seed=1, n=10)
    table = compute_recursions(stats, model, PointProcess.geometric(0.2))
    exact = enumerate_exact_posterior(stats, model, GeometricPrior(0.2), KPrior.uniform(9))
    assert table.log_evidence == pytest.approx(exact.log_evidence + math.log(10), abs=1e-10)


def test_last_value_and_p_to_one_limit():
    stats, model = make_series("poisson", seed=0, n=8)
    table = compute_recursions(stats, model, PointProcess.geometric(0.3))
    assert table.log_r[8] == pytest.approx(model.log_marginal(stats, 8, 8))
    assert table.log_r[9] == 0.0
    ones = compute_recursions(stats, model, PointProcess.geometric(1.0))
    singles = sum(model.log_marginal(stats, t, t) for t in range(1, 9))
    assert ones.log_evidence == pytest.approx(singles, abs=1e-12)


def test_next_changepoint_distribution_sums_to_one():
    stats, model = make_series("bernoulli", seed=2, n=30)
    table = compute_recursions(stats, model, PointProcess.negbin(3.0, 0.3))
    for t in range(0, 29):
        taus, probs, tail = table.next_changepoint(t)
        assert probs.sum() + tail == pytest.approx(1.0, abs=1e-10)
        assert np.all(taus > t)


def test_inconsistent_table_is_detected():
    stats, model = make_series("gaussian", seed=2, n=12)
    table = compute_recursions(stats, model, PointProcess.geometric(0.2))
    table.log_r[5] += 1e-3
    with pytest.raises(NumericalConsistencyError):
        table.next_changepoint(3)


@pytest.mark.parametrize("kind", ["poisson", "gaussian"])
def test_forward_samples_match_enumeration(kind):
    stats, model = make_series(kind, seed=6, n=9)
    table = compute_recursions(stats, model, PointProcess.geometric(0.25))
    exact = enumerate_exact_posterior(stats, model, GeometricPrior(0.25), KPrior.uniform(8))
    draws = sample_changepoints(table, 400_000, np.random.default_rng(0))
    assert tv_distance(exact.as_dict(), empirical_distribution(draws.segmentations())) < 0.01
    np.testing.assert_allclose(draws.pos_prob(), exact.pos_prob, atol=0.005)


def test_single_draw_and_compressed_layout():
    stats, model = make_series("poisson", seed=1, n=15)
    table = compute_recursions(stats, model, PointProcess.geometric(0.1))
    one = sample_changepoints(table, 1, np.random.default_rng(3))
    assert len(one) == 1
    seg = one[0]
    assert list(seg) == sorted(seg) and all(1 <= t <= 14 for t in seg)
    many = sample_changepoints(table, 500, np.random.default_rng(3))
    assert many.offsets[-1] == many.positions.size
    assert sum(len(s) for s in many.segmentations()) == many.k.sum()
    again = RecursionSampleSet.from_segmentations(many.segmentations(), 15)
    np.testing.assert_array_equal(again.keys(), many.keys())
    with pytest.raises(ValueError):
        sample_changepoints(table, 0, np.random.default_rng(0))


def test_truncation_changes_little():
    rng = np.random.default_rng(4)
    y = np.concatenate([rng.normal(mu, 1, 30) for mu in (0, 3, -1, 2, 0, 4, 1, -2, 3, 0)])
    stats = build_stats(TimeSeries(y, "real"))
    model = GaussianCommonVariance(1.0, 0.0, 3.0)
    proc = PointProcess.geometric(0.2)
    full = compute_recursions(stats, model, proc)
    cut = compute_recursions(stats, model, proc, truncate_tol=1e-12)
    assert cut.max_duration is not None
    assert cut.log_evidence == pytest.approx(full.log_evidence, abs=1e-8)
    draws = sample_changepoints(cut, 2000, np.random.default_rng(1))
    assert draws.k.min() >= 1


def test_within_segment_permutation_leaves_evidence_unchanged():
    rng = np.random.default_rng(9)
    y = rng.poisson(3, 20)
    perm = y.copy()
    perm[5:] = rng.permutation(perm[5:])
    m, proc = PoissonGamma(1.0, 1.0), PointProcess.geometric(1e-12)
    a = compute_recursions(build_stats(TimeSeries(y, "counts")), m, proc)
    b = compute_recursions(build_stats(TimeSeries(perm, "counts")), m, proc)
    # with vanishing changepoint rate the evidence is the one-segment marginal
    assert a.log_evidence == pytest.approx(b.log_evidence, abs=1e-9)


def test_independence_chain_with_exhaustive_pool_reproduces_posterior():
    n = 7
    stats, model = make_series("gaussian", seed=3, n=n)
    prior, kp = GeometricPrior(0.3), KPrior.uniform(n - 1)
    exact = enumerate_exact_posterior(stats, model, prior, kp)
    # pool multiplicities proportional to the exact posterior
    reps = np.maximum(np.round(exact.probs * 20000).astype(int), 1)
    pool = RecursionSampleSet.from_segmentations(
        [s for s, r in zip(exact.segmentations, reps) for _ in range(r)], n)
    out = independence_mcmc(pool, stats, model, prior, kp, 60_000, np.random.default_rng(2))
    assert tv_distance(exact.as_dict(), empirical_distribution(out.taus)) < 0.02
    assert out.acceptance["independence"] > 0.9


def test_independence_chain_with_one_element_pool_never_moves():
    stats, model = make_series("poisson", seed=3, n=10)
    pool = RecursionSampleSet.from_segmentations([(4,)] * 5, 10)
    out = independence_mcmc(pool, stats, model, GeometricPrior(0.1), KPrior.uniform(9), 300,
                            np.random.default_rng(0), SamplerConfig(update_gamma=True))
    assert out.unique_visited == 1
    assert set(out.taus) == {(4,)}


def test_independence_chain_errors():
    stats, model = make_series("poisson", seed=3, n=10)
    empty = RecursionSampleSet.from_segmentations([], 10)
    with pytest.raises(ValueError):
        independence_mcmc(empty, stats, model, GeometricPrior(0.1), KPrior.uniform(9), 10,
                          np.random.default_rng(0))
    with pytest.raises(ValidationError):
        RecursionSampleSet.from_segmentations([(3, 3)], 10)
