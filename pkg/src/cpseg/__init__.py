"""Bayesian retrospective multiple-changepoint analysis.

A collapsed Metropolis-Hastings sampler over segmentations with conjugate
segment models, backward filtering recursions for exact sampling, and the
diagnostics and sweeps used to compare them.
"""
from .analysis import (ExactPosterior, PosteriorSummary, SweepResult, enumerate_exact_posterior,
                       integrated_autocorrelation_time, modal_k, sensitivity_sweep, summarize,
                       tv_distance)
from .core import DataKind, Segmentation, SufficientStats, TimeSeries, ValidationError, build_stats
from .hyper import BetaShapeHyperprior, GaussianHyperprior, PoissonRateHyperprior
from .models import BernoulliBeta, GaussianCommonVariance, PoissonGamma, SegmentModel
from .priors import EvenOrderStatsPrior, GeometricPrior, KPrior, PointProcess
from .recursions import (NumericalConsistencyError, RecursionSampleSet, RecursionTable,
                         compute_recursions, independence_mcmc, sample_changepoints)
from .sampler import ChainOutput, ChangepointSampler, SamplerConfig, log_collapsed_posterior, run_chains

__all__ = [
    "BernoulliBeta", "BetaShapeHyperprior", "ChainOutput", "ChangepointSampler", "DataKind",
    "EvenOrderStatsPrior", "ExactPosterior", "GaussianCommonVariance", "GaussianHyperprior",
    "GeometricPrior", "KPrior", "NumericalConsistencyError", "PointProcess", "PoissonGamma",
    "PoissonRateHyperprior", "PosteriorSummary", "RecursionSampleSet", "RecursionTable",
    "SamplerConfig", "SegmentModel", "Segmentation", "SufficientStats", "SweepResult", "TimeSeries",
    "ValidationError", "build_stats", "compute_recursions", "enumerate_exact_posterior",
    "independence_mcmc", "integrated_autocorrelation_time", "log_collapsed_posterior", "modal_k",
    "run_chains", "sample_changepoints", "sensitivity_sweep", "summarize", "tv_distance",
]
