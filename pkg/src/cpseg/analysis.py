"""Posterior summaries, chain diagnostics, exact enumeration for small series,
and sensitivity sweeps of the recursion analysis."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from .core import SufficientStats
from .models import SegmentModel
from .priors import KPrior, PointProcess, SegPrior
from .recursions import compute_recursions, sample_changepoints
from .sampler import ChainOutput, log_collapsed_posterior

ENUMERATION_LIMIT = 1_000_000


@dataclass
class ExactPosterior:
    n: int
    segmentations: list[tuple[int, ...]]
    log_post: np.ndarray
    probs: np.ndarray
    k_dist: np.ndarray
    pos_prob: np.ndarray
    log_evidence: float

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return dict(zip(self.segmentations, self.probs.tolist()))

    def keys(self) -> np.ndarray:
        return np.array([sum(1 << (t - 1) for t in s) for s in self.segmentations], dtype=np.int64)


def n_segmentations(n: int, kmax: int) -> int:
    return sum(math.comb(n - 1, k) for k in range(min(kmax, n - 1) + 1))


def enumerate_exact_posterior(stats: SufficientStats, model: SegmentModel, seg_prior: SegPrior,
                              k_prior: KPrior, kmax: int | None = None) -> ExactPosterior:
    """Normalised posterior over every segmentation with at most ``kmax`` changepoints."""
    n = stats.n
    kmax = min(k_prior.kmax if kmax is None else kmax, n - 1)
    total = n_segmentations(n, kmax)
    if total > ENUMERATION_LIMIT:
        raise ValueError(f"{total} segmentations exceed the enumeration limit {ENUMERATION_LIMIT}")
    segs = [c for k in range(kmax + 1) for c in itertools.combinations(range(1, n), k)]
    lp = np.array([log_collapsed_posterior(s, stats, model, seg_prior, k_prior) for s in segs])
    log_z = float(logsumexp(lp))
    probs = np.exp(lp - log_z)
    k_dist = np.zeros(kmax + 1)
    pos = np.zeros(n - 1)
    for s, w in zip(segs, probs.tolist()):
        k_dist[len(s)] += w
        for t in s:
            pos[t - 1] += w
    return ExactPosterior(n, segs, lp, probs, k_dist, pos, log_z)


def empirical_distribution(segs: Sequence[Sequence[int]]) -> dict[tuple[int, ...], float]:
    counts: dict[tuple[int, ...], int] = {}
    for s in segs:
        key = tuple(s)
        counts[key] = counts.get(key, 0) + 1
    total = len(segs)
    return {k: c / total for k, c in counts.items()}


def tv_distance(p: Mapping | np.ndarray, q: Mapping | np.ndarray) -> float:
    """Half the L1 distance between two distributions (dicts or aligned arrays)."""
    if isinstance(p, Mapping):
        keys = set(p) | set(q)
        return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    size = max(p.size, q.size)
    p = np.pad(p, (0, size - p.size))
    q = np.pad(q, (0, size - q.size))
    return 0.5 * float(np.abs(p - q).sum())


def autocorrelation(x: Sequence[float], max_lag: int) -> np.ndarray:
    """Biased ACF estimate at lags ``0..max_lag``; a constant series gives all ones."""
    x = np.asarray(x, dtype=float)
    m = x.size
    max_lag = min(max_lag, m - 1)
    d = x - x.mean()
    var = float(d @ d)
    if var == 0.0:
        return np.ones(max_lag + 1)
    nfft = 1 << (2 * m - 1).bit_length()
    f = np.fft.rfft(d, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1]
    return acov / var


def integrated_autocorrelation_time(x: Sequence[float], max_lag: int | None = None) -> tuple[float, bool]:
    """``1 + 2 * sum(acf[1:W])`` where ``W`` is the first lag with
    ``acf < 2/sqrt(M)``. Returns ``(iact, capped)``; ``capped`` is set when no
    such lag exists within ``max_lag`` and the sum ran to the cap."""
    x = np.asarray(x, dtype=float)
    m = x.size
    if max_lag is None:
        max_lag = default_max_lag(m)
    acf = autocorrelation(x, max_lag)
    below = np.flatnonzero(acf[1:] < 2.0 / math.sqrt(m))
    if below.size:
        window = int(below[0]) + 1
        capped = False
    else:
        window = acf.size
        capped = True
    return 1.0 + 2.0 * float(acf[1:window].sum()), capped


def default_max_lag(m: int) -> int:
    return max(1, min(200, m // 5))


@dataclass
class PosteriorSummary:
    k_dist: np.ndarray
    pos_prob: np.ndarray
    hyper_means: dict[str, float]
    acf: np.ndarray
    iact: float
    iact_capped: bool

    @property
    def mean_k(self) -> float:
        return float(np.arange(self.k_dist.size) @ self.k_dist)


def summarize(chain: ChainOutput, n: int | None = None, max_lag: int | None = None) -> PosteriorSummary:
    if len(chain) == 0:
        raise ValueError("chain has no recorded samples")
    if n is not None and n != chain.n:
        raise ValueError("chain length mismatch")
    lag = default_max_lag(len(chain)) if max_lag is None else max_lag
    means = {name: float(v.mean()) for name, v in chain.hyper.items()}
    if not np.all(np.isnan(chain.p)):
        means["p"] = float(chain.p.mean())
    iact, capped = integrated_autocorrelation_time(chain.k, lag)
    return PosteriorSummary(
        k_dist=chain.k_dist(),
        pos_prob=chain.pos_prob(),
        hyper_means=means,
        acf=autocorrelation(chain.k, lag),
        iact=iact,
        iact_capped=capped,
    )


def modal_k(k_dist: Sequence[float]) -> tuple[int, bool]:
    """Most probable k, ties broken toward the smaller k; second value flags a tie."""
    k_dist = np.asarray(k_dist)
    top = k_dist.max()
    winners = np.flatnonzero(k_dist == top)
    return int(winners[0]), bool(winners.size > 1)


@dataclass
class GewekeResult:
    name: str
    z: float
    p_value: float
    iact: float


def geweke_test(name: str, marginal: Sequence[float], successive: Sequence[float]) -> GewekeResult:
    """Compare a functional's mean under independent prior draws with its mean
    along a successive-conditional chain (prior draw, data, sampler step, new
    data, ...). The chain variance is inflated by its integrated
    autocorrelation time."""
    a = np.asarray(marginal, dtype=float)
    b = np.asarray(successive, dtype=float)
    tau, _ = integrated_autocorrelation_time(b)
    tau = max(tau, 1.0)
    se = math.sqrt(a.var(ddof=1) / a.size + tau * b.var(ddof=1) / b.size)
    z = (a.mean() - b.mean()) / se
    return GewekeResult(name, float(z), float(2.0 * norm.sf(abs(z))), tau)


@dataclass
class SweepResult:
    name: str
    grid: np.ndarray
    modal_k: np.ndarray
    ties: np.ndarray
    k_dists: list[np.ndarray]


def sensitivity_sweep(stats: SufficientStats, model: SegmentModel, proc: PointProcess,
                      name: str, grid: Sequence[float], N: int,
                      rng: np.random.Generator) -> SweepResult:
    """Recursion analysis at each grid value of one parameter, recording the
    modal number of changepoints among ``N`` draws.

    ``name`` is ``"p"`` (the duration distribution's success probability) or
    a hyperparameter of ``model`` such as ``"sigma"``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    modes, ties, dists = [], [], []
    for value in grid.tolist():
        if name == "p":
            m, pp = model, replace(proc, p=value)
        else:
            m, pp = model.with_hyper(**{name: value}), proc
        table = compute_recursions(stats, m, pp)
        draws = sample_changepoints(table, N, rng)
        dist = draws.k_dist()
        k, tie = modal_k(dist)
        modes.append(k)
        ties.append(tie)
        dists.append(dist)
    return SweepResult(name, grid, np.asarray(modes), np.asarray(ties), dists)
