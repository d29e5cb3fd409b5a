"""Hyperpriors on the shared segment-model parameters and their updates.

Each update receives freshly drawn segment parameters ``theta`` (one per
segment) and returns a new model; the draws are discarded afterwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import SufficientStats
from .models import BernoulliBeta, GaussianCommonVariance, PoissonGamma, SegmentModel

# below this the nu^2 conditional is numerically degenerate; the update is skipped
NU2_SCALE_FLOOR = 1e-300


def _inv_gamma(rng: np.random.Generator, shape: float, scale: float) -> float:
    return scale / rng.gamma(shape)


@dataclass(frozen=True)
class GaussianHyperprior:
    """Inverse-gamma priors on sigma^2 and nu^2 and a normal prior on mu0.

    The defaults are the improper limits pi(sigma) ~ 1/sigma,
    pi(nu) ~ 1/nu and pi(mu0) ~ 1.
    """

    sigma2_shape: float = 0.0
    sigma2_scale: float = 0.0
    nu2_shape: float = 0.0
    nu2_scale: float = 0.0
    mu0_mean: float = 0.0
    mu0_var: float = math.inf

    def update(self, model: GaussianCommonVariance, stats: SufficientStats,
               bounds: Sequence[tuple[int, int]], theta: Sequence[float],
               rng: np.random.Generator) -> GaussianCommonVariance:
        return update_gaussian_hyperparams(bounds, theta, model, stats, rng, self)

    def sample_prior(self, rng: np.random.Generator) -> GaussianCommonVariance:
        sigma2 = _inv_gamma(rng, self.sigma2_shape, self.sigma2_scale)
        nu2 = _inv_gamma(rng, self.nu2_shape, self.nu2_scale)
        mu0 = rng.normal(self.mu0_mean, math.sqrt(self.mu0_var))
        return GaussianCommonVariance(sigma=math.sqrt(sigma2), mu0=float(mu0), nu=math.sqrt(nu2))


def update_gaussian_hyperparams(bounds, theta, model: GaussianCommonVariance,
                                stats: SufficientStats, rng: np.random.Generator,
                                hyperprior: GaussianHyperprior | None = None) -> GaussianCommonVariance:
    """Gibbs scan sigma^2, then nu^2, then mu0, given segment means ``theta``."""
    hp = hyperprior or GaussianHyperprior()
    mus = np.asarray(theta, dtype=float)
    n_seg = mus.size
    n = stats.n
    sigma2, nu2, mu0 = model.sigma ** 2, model.nu ** 2, model.mu0

    resid = 0.0
    for (s, t), mu in zip(bounds, mus.tolist()):
        m = t - s + 1
        x = stats.S[t] - stats.S[s - 1]
        within = max(stats.SS[t] - stats.SS[s - 1] - x * x / m, 0.0)
        resid += within + m * (x / m + stats.shift - mu) ** 2
    dev2 = float(np.sum((mus - mu0) ** 2))

    shape = hp.sigma2_shape + 0.5 * (n + n_seg)
    scale = hp.sigma2_scale + 0.5 * (resid + dev2 / nu2)
    sigma2 = _inv_gamma(rng, shape, scale)

    scale = hp.nu2_scale + dev2 / (2.0 * sigma2)
    if scale >= NU2_SCALE_FLOOR:
        nu2 = _inv_gamma(rng, hp.nu2_shape + 0.5 * n_seg, scale)

    prec = n_seg / (nu2 * sigma2) + 1.0 / hp.mu0_var
    mean = (mus.sum() / (nu2 * sigma2) + hp.mu0_mean / hp.mu0_var) / prec
    mu0 = float(rng.normal(mean, math.sqrt(1.0 / prec)))

    return GaussianCommonVariance(sigma=math.sqrt(sigma2), mu0=mu0, nu=math.sqrt(nu2))


@dataclass(frozen=True)
class PoissonRateHyperprior:
    """Gamma(shape, rate) prior on the Gamma-prior rate ``lam``; ``rho`` stays fixed.

    The default is the improper pi(lam) ~ 1/lam.
    """

    shape: float = 0.0
    rate: float = 0.0

    def update(self, model: PoissonGamma, stats, bounds, theta, rng) -> PoissonGamma:
        mus = np.asarray(theta, dtype=float)
        lam = rng.gamma(self.shape + mus.size * model.rho, 1.0 / (self.rate + mus.sum()))
        return PoissonGamma(rho=model.rho, lam=float(lam))


@dataclass(frozen=True)
class BetaShapeHyperprior:
    """Independent Gamma(shape, rate) priors on the Beta shapes ``alpha`` and
    ``beta``, updated by log-scale random-walk Metropolis (no conjugate form)."""

    shape: float = 1.0
    rate: float = 1.0
    step: float = 0.5

    def _log_target(self, a: float, b: float, lphi: float, l1phi: float, n_seg: int) -> float:
        prior = (self.shape - 1) * (math.log(a) + math.log(b)) - self.rate * (a + b)
        lg = math.lgamma
        lik = n_seg * (lg(a + b) - lg(a) - lg(b)) + (a - 1) * lphi + (b - 1) * l1phi
        # Jacobian of the log-scale walk
        return prior + lik + math.log(a) + math.log(b)

    def update(self, model: BernoulliBeta, stats, bounds, theta, rng) -> BernoulliBeta:
        phi = np.clip(np.asarray(theta, dtype=float), 1e-300, 1.0 - 1e-16)
        lphi, l1phi = float(np.log(phi).sum()), float(np.log1p(-phi).sum())
        a, b = model.alpha, model.beta
        cur = self._log_target(a, b, lphi, l1phi, phi.size)
        for which in (0, 1):
            z = rng.normal()
            u = rng.random()
            na, nb = (a * math.exp(self.step * z), b) if which == 0 else (a, b * math.exp(self.step * z))
            new = self._log_target(na, nb, lphi, l1phi, phi.size)
            if u < math.exp(min(0.0, new - cur)):
                a, b, cur = na, nb, new
        return BernoulliBeta(alpha=a, beta=b)


Hyperprior = GaussianHyperprior | PoissonRateHyperprior | BetaShapeHyperprior


def default_hyperprior(model: SegmentModel) -> Hyperprior:
    if isinstance(model, GaussianCommonVariance):
        return GaussianHyperprior()
    if isinstance(model, PoissonGamma):
        return PoissonRateHyperprior()
    if isinstance(model, BernoulliBeta):
        return BetaShapeHyperprior()
    raise TypeError(f"no hyperprior for {type(model).__name__}")
