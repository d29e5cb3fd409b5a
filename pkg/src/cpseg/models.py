"""Conjugate segment models with closed-form log marginal likelihoods.

Every model exposes the same surface so samplers and recursions never branch
on the data kind:

* ``log_marginal(stats, s, t)``: log of the segment likelihood with the
  segment parameter integrated out against its conjugate prior;
* ``log_marginal_many(stats, s, t)``: the same over broadcast index arrays;
* ``scorer(stats)``: an unchecked scalar closure for hot loops;
* ``sample_param(stats, s, t, rng)``: a draw from the segment parameter's
  conditional posterior.

``math.lgamma`` and ``scipy.special.gammaln`` supply log-gamma (both accurate
to a few ulp over the positive reals used here).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, ClassVar

import numpy as np
from scipy.special import gammaln

from .core import DataKind, SufficientStats, ValidationError

LOG_2PI = math.log(2.0 * math.pi)

Scorer = Callable[[int, int], float]


class BatchScorer:
    """Vectorised, unchecked segment scorer bound to one series.

    ``split(left, right)`` scores the two pieces ``(left+1, t)`` and
    ``(t+1, right)`` for every ``t`` in ``left+1..right-1``; subclasses use
    contiguous slices there instead of gathers.
    """

    def __init__(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        self.fn = fn

    def __call__(self, s, t) -> np.ndarray:
        return self.fn(s, t)

    def split(self, left: int, right: int) -> tuple[np.ndarray, np.ndarray]:
        ts = np.arange(left + 1, right)
        return self.fn(left + 1, ts), self.fn(ts + 1, right)


def _check_kind(stats: SufficientStats, kind: DataKind) -> None:
    if stats.kind is not kind:
        raise ValidationError(f"model expects {kind.value} data, stats are {stats.kind.value}")


def _as_index_arrays(stats, s, t):
    s = np.asarray(s, dtype=np.int64)
    t = np.asarray(t, dtype=np.int64)
    if np.any(s < 1) or np.any(t > stats.n) or np.any(s > t):
        raise IndexError("segment indices outside 1 <= s <= t <= n")
    return s, t


class SegmentModel:
    kind: ClassVar[DataKind]
    hyper_names: ClassVar[tuple[str, ...]]

    def scorer(self, stats: SufficientStats) -> Scorer:
        raise NotImplementedError

    def log_marginal(self, stats: SufficientStats, s: int, t: int) -> float:
        _check_kind(stats, self.kind)
        stats.check_range(s, t)
        return self.scorer(stats)(s, t)

    def log_marginal_many(self, stats: SufficientStats, s, t) -> np.ndarray:
        _check_kind(stats, self.kind)
        s, t = _as_index_arrays(stats, s, t)
        return self._many(stats, s, t)

    def _many(self, stats: SufficientStats, s, t) -> np.ndarray:
        raise NotImplementedError

    def batch_scorer(self, stats: SufficientStats) -> BatchScorer:
        """Unchecked vectorised scorer; may precompute per-series tables."""
        return BatchScorer(lambda s, t: self._many(stats, s, t))

    def sample_param(self, stats: SufficientStats, s: int, t: int, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def hyper(self) -> dict[str, float]:
        return {name: float(getattr(self, _attr(name))) for name in self.hyper_names}

    def with_hyper(self, **values) -> "SegmentModel":
        return replace(self, **{_attr(k): v for k, v in values.items()})


def _attr(name: str) -> str:
    return "lam" if name == "lambda" else name


@dataclass(frozen=True)
class PoissonGamma(SegmentModel):
    """Poisson counts with a Gamma(shape=rho, rate=lam) prior on the intensity."""

    rho: float = 1.0
    lam: float = 1.0

    kind: ClassVar[DataKind] = DataKind.COUNTS
    hyper_names: ClassVar[tuple[str, ...]] = ("rho", "lambda")

    def __post_init__(self):
        if not (self.rho > 0 and self.lam > 0):
            raise ValidationError(f"PoissonGamma needs rho > 0 and lam > 0, got {self.rho}, {self.lam}")

    def scorer(self, stats):
        S, LF = stats.S, stats.LF
        rho, lam = self.rho, self.lam
        const = rho * math.log(lam) - math.lgamma(rho)
        lgamma, log = math.lgamma, math.log

        def f(s, t):
            a = S[t] - S[s - 1] + rho
            return const - (LF[t] - LF[s - 1]) + lgamma(a) - a * log(t - s + 1 + lam)

        return f

    def _many(self, stats, s, t):
        a = stats.prefix_sum[t] - stats.prefix_sum[s - 1] + self.rho
        lf = stats.prefix_logfact[t] - stats.prefix_logfact[s - 1]
        return (self.rho * math.log(self.lam) - math.lgamma(self.rho) - lf
                + gammaln(a) - a * np.log(t - s + 1 + self.lam))

    def batch_scorer(self, stats):
        # segment totals are integers, so log-gamma and log terms are lookups
        if stats.prefix_sum[-1] > 50 * stats.n + 10_000:
            return super().batch_scorer(stats)
        const = self.rho * math.log(self.lam) - math.lgamma(self.rho)
        lg = gammaln(np.arange(int(stats.prefix_sum[-1]) + 1) + self.rho)
        lw = np.log(np.arange(stats.n + 1) + self.lam)
        S, LF = stats.prefix_sum, stats.prefix_logfact

        rho = self.rho

        def f(s, t):
            x = S[t] - S[s - 1]
            return const - (LF[t] - LF[s - 1]) + lg[x] - (x + rho) * lw[t - s + 1]

        def split(left, right):
            size = right - left - 1
            cs, cf = S[left + 1:right], LF[left + 1:right]
            xl, xr = cs - S[left], S[right] - cs
            lml = const - (cf - LF[left]) + lg[xl] - (xl + rho) * lw[1:size + 1]
            lmr = const - (LF[right] - cf) + lg[xr] - (xr + rho) * lw[size:0:-1]
            return lml, lmr

        out = BatchScorer(f)
        out.split = split
        return out

    def sample_param(self, stats, s, t, rng):
        total = stats.segment_sum(s, t)
        return float(rng.gamma(total + self.rho, 1.0 / (t - s + 1 + self.lam)))


@dataclass(frozen=True)
class BernoulliBeta(SegmentModel):
    """Bernoulli trials with a Beta(alpha, beta) prior on the success probability."""

    alpha: float = 1.0
    beta: float = 1.0

    kind: ClassVar[DataKind] = DataKind.BINARY
    hyper_names: ClassVar[tuple[str, ...]] = ("alpha", "beta")

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValidationError(f"BernoulliBeta needs alpha, beta > 0, got {self.alpha}, {self.beta}")

    def scorer(self, stats):
        S = stats.S
        a, b = self.alpha, self.beta
        const = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        lgamma = math.lgamma

        def f(s, t):
            m = t - s + 1
            x = S[t] - S[s - 1]
            return const + lgamma(x + a) + lgamma(m - x + b) - lgamma(m + a + b)

        return f

    def _many(self, stats, s, t):
        a, b = self.alpha, self.beta
        m = t - s + 1
        x = stats.prefix_sum[t] - stats.prefix_sum[s - 1]
        const = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        return const + gammaln(x + a) + gammaln(m - x + b) - gammaln(m + a + b)

    def batch_scorer(self, stats):
        a, b = self.alpha, self.beta
        const = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        idx = np.arange(stats.n + 1)
        la, lb, lab = gammaln(idx + a), gammaln(idx + b), gammaln(idx + a + b)
        S = stats.prefix_sum

        def f(s, t):
            m = t - s + 1
            x = S[t] - S[s - 1]
            return const + la[x] + lb[m - x] - lab[m]

        def split(left, right):
            size = right - left - 1
            cs = S[left + 1:right]
            xl, xr = cs - S[left], S[right] - cs
            ml, mr = idx[1:size + 1], idx[size:0:-1]
            return (const + la[xl] + lb[ml - xl] - lab[ml],
                    const + la[xr] + lb[mr - xr] - lab[mr])

        out = BatchScorer(f)
        out.split = split
        return out

    def sample_param(self, stats, s, t, rng):
        x = stats.segment_sum(s, t)
        m = t - s + 1
        return float(rng.beta(x + self.alpha, m - x + self.beta))


@dataclass(frozen=True)
class GaussianCommonVariance(SegmentModel):
    """Normal data with common s.d. ``sigma``; segment means ~ N(mu0, nu^2 sigma^2).

    Only the segment mean is integrated out; ``sigma``, ``mu0`` and ``nu`` are
    shared hyperparameters.
    """

    sigma: float = 1.0
    mu0: float = 0.0
    nu: float = 1.0

    kind: ClassVar[DataKind] = DataKind.REAL
    hyper_names: ClassVar[tuple[str, ...]] = ("sigma", "mu0", "nu")

    def __post_init__(self):
        if not (self.sigma > 0 and self.nu > 0):
            raise ValidationError(f"Gaussian model needs sigma, nu > 0, got {self.sigma}, {self.nu}")

    def scorer(self, stats):
        S, SS = stats.S, stats.SS
        mu0 = self.mu0 - stats.shift
        w = 1.0 / (self.nu * self.nu)
        per_point = 0.5 * LOG_2PI + math.log(self.sigma)
        log_nu = math.log(self.nu)
        inv2s2 = 0.5 / (self.sigma * self.sigma)
        log = math.log

        def f(s, t):
            m = t - s + 1
            x = S[t] - S[s - 1]
            within = SS[t] - SS[s - 1] - x * x / m
            if within < 0.0:
                within = 0.0
            d = x / m - mu0
            quad = within + m * w / (m + w) * d * d
            return -m * per_point - log_nu - 0.5 * log(m + w) - inv2s2 * quad

        return f

    def _many(self, stats, s, t):
        m = (t - s + 1).astype(float)
        x = stats.prefix_sum[t] - stats.prefix_sum[s - 1]
        within = np.maximum(stats.prefix_sumsq[t] - stats.prefix_sumsq[s - 1] - x * x / m, 0.0)
        w = 1.0 / (self.nu * self.nu)
        d = x / m - (self.mu0 - stats.shift)
        quad = within + m * w / (m + w) * d * d
        return (-m * (0.5 * LOG_2PI + math.log(self.sigma)) - math.log(self.nu)
                - 0.5 * np.log(m + w) - quad / (2.0 * self.sigma ** 2))

    def batch_scorer(self, stats):
        S, SS = stats.prefix_sum, stats.prefix_sumsq
        w = 1.0 / (self.nu * self.nu)
        per_point = 0.5 * LOG_2PI + math.log(self.sigma)
        const = -math.log(self.nu)
        inv2s2 = 0.5 / (self.sigma * self.sigma)
        mu0 = self.mu0 - stats.shift

        def score(m, x, xx):
            within = np.maximum(xx - x * x / m, 0.0)
            d = x / m - mu0
            quad = within + m * w / (m + w) * d * d
            return const - m * per_point - 0.5 * np.log(m + w) - inv2s2 * quad

        def f(s, t):
            m = np.asarray(t - s + 1, dtype=float)
            return score(m, S[t] - S[s - 1], SS[t] - SS[s - 1])

        def split(left, right):
            size = right - left - 1
            ml = np.arange(1.0, size + 1)
            cs, css = S[left + 1:right], SS[left + 1:right]
            return (score(ml, cs - S[left], css - SS[left]),
                    score(ml[::-1], S[right] - cs, SS[right] - css))

        out = BatchScorer(f)
        out.split = split
        return out

    def posterior_mean_params(self, stats, s, t) -> tuple[float, float]:
        """Mean and variance of the segment-mean posterior."""
        m = t - s + 1
        w = 1.0 / (self.nu * self.nu)
        x = stats.segment_sum(s, t)
        return (x + self.mu0 * w) / (m + w), self.sigma ** 2 / (m + w)

    def sample_param(self, stats, s, t, rng):
        mean, var = self.posterior_mean_params(stats, s, t)
        return float(rng.normal(mean, math.sqrt(var)))


MODELS: dict[str, type[SegmentModel]] = {
    "poisson": PoissonGamma,
    "bernoulli": BernoulliBeta,
    "gaussian": GaussianCommonVariance,
}


def log_marginal_poisson(stats, s, t, params: PoissonGamma) -> float:
    return params.log_marginal(stats, s, t)


def log_marginal_bernoulli(stats, s, t, params: BernoulliBeta) -> float:
    return params.log_marginal(stats, s, t)


def log_marginal_gaussian(stats, s, t, params: GaussianCommonVariance) -> float:
    return params.log_marginal(stats, s, t)


def sample_segment_param(stats, s, t, params: SegmentModel, rng) -> float:
    _check_kind(stats, params.kind)
    stats.check_range(s, t)
    return params.sample_param(stats, s, t, rng)
