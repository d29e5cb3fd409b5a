"""Segmentation priors, priors on the number of changepoints, and duration
distributions for the point-process form used by the recursions."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import ClassVar, Sequence

import numpy as np
from scipy import stats as sps

from .core import Segmentation, ValidationError, validate_segmentation

NEG_INF = -math.inf


def log_binom(n: int, k: int) -> float:
    if k < 0 or k > n:
        return NEG_INF
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _log_pos(x: float) -> float:
    return math.log(x) if x > 0 else NEG_INF


@dataclass(frozen=True)
class GeometricPrior:
    """Independent Bernoulli(p) changepoint indicators: ``p^k (1-p)^(n-1-k)``.

    The final segment is treated as censored, which makes ``p | z`` exactly
    Beta(k + a1, n - 1 - k + a2) under a Beta(a1, a2) hyperprior.
    """

    p: float

    name: ClassVar[str] = "geometric"
    has_p: ClassVar[bool] = True

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValidationError(f"geometric prior needs 0 < p < 1, got {self.p}")

    def log_prior(self, taus: Sequence[int], n: int) -> float:
        k = len(taus)
        return k * math.log(self.p) + (n - 1 - k) * math.log1p(-self.p)

    def log_add_ratio(self, n: int, k: int, left: int, right: int, t: int) -> float:
        return math.log(self.p) - math.log1p(-self.p)

    def log_move_ratio(self, left: int, right: int, old: int, new: int) -> float:
        return 0.0

    def log_move_weights(self, left: int, right: int, ts: np.ndarray) -> np.ndarray | float:
        return 0.0

    def log_span_weights(self, left: int, right: int) -> float:
        return 0.0

    def log_move_weight(self, left: int, right: int, t: int) -> float:
        return 0.0

    def with_p(self, p: float) -> "GeometricPrior":
        return GeometricPrior(p)


_LOG_INTS = np.array([NEG_INF])


def _log_ints(size: int) -> np.ndarray:
    """``log(0..size-1)`` (``log 0 = -inf``), from a table grown on demand."""
    global _LOG_INTS
    if _LOG_INTS.size < size:
        with np.errstate(divide="ignore"):
            _LOG_INTS = np.log(np.arange(max(size, 2 * _LOG_INTS.size), dtype=float))
    return _LOG_INTS


@dataclass(frozen=True)
class EvenOrderStatsPrior:
    """Changepoints at the even order statistics of 2k+1 draws without
    replacement from ``1..n-1``:

        C(n-1, 2k+1)^-1 * prod_{j=0..k} (tau_{j+1} - tau_j - 1)

    Adjacent changepoints have zero prior mass.
    """

    name: ClassVar[str] = "even_order_stats"
    has_p: ClassVar[bool] = False

    def log_prior(self, taus: Sequence[int], n: int) -> float:
        k = len(taus)
        edges = (0, *taus, n)
        total = -log_binom(n - 1, 2 * k + 1)
        if total == math.inf:
            return NEG_INF
        for a, b in zip(edges[:-1], edges[1:]):
            total += _log_pos(b - a - 1)
        return total

    def log_add_ratio(self, n: int, k: int, left: int, right: int, t: int) -> float:
        new_left = t - left - 1
        new_right = right - t - 1
        if new_left <= 0 or new_right <= 0 or 2 * k + 3 > n - 1:
            return NEG_INF
        return (math.log(new_left) + math.log(new_right) - math.log(right - left - 1)
                + log_binom(n - 1, 2 * k + 1) - log_binom(n - 1, 2 * k + 3))

    def log_move_ratio(self, left: int, right: int, old: int, new: int) -> float:
        num = _log_pos(new - left - 1) + _log_pos(right - new - 1)
        if num == NEG_INF:
            return NEG_INF
        return num - math.log(old - left - 1) - math.log(right - old - 1)

    def log_move_weights(self, left: int, right: int, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts)
        logs = _log_ints(right - left)
        return logs[ts - left - 1] + logs[right - ts - 1]

    def log_span_weights(self, left: int, right: int) -> np.ndarray:
        """``log_move_weights`` over the whole span ``left+1..right-1``."""
        size = right - left - 1
        logs = _log_ints(size)
        return logs[:size] + logs[size - 1::-1]

    def log_move_weight(self, left: int, right: int, t: int) -> float:
        a, b = t - left - 1, right - t - 1
        if a <= 0 or b <= 0:
            return NEG_INF
        return math.log(a) + math.log(b)


SegPrior = GeometricPrior | EvenOrderStatsPrior


def log_seg_prior(seg: Segmentation, n: int, prior: SegPrior) -> float:
    validate_segmentation(seg, n)
    return prior.log_prior(seg.taus, n)


def _neighbours(taus: Sequence[int], t: int, n: int) -> tuple[int, int]:
    i = bisect.bisect_left(taus, t)
    left = taus[i - 1] if i > 0 else 0
    right = taus[i] if i < len(taus) else n
    return left, right


def log_seg_prior_ratio(seg_from: Segmentation, seg_to: Segmentation, n: int, prior: SegPrior) -> float:
    """``log prior(seg_to) - log prior(seg_from)`` using only the touched gaps."""
    validate_segmentation(seg_from, n)
    validate_segmentation(seg_to, n)
    a, b = set(seg_from.taus), set(seg_to.taus)
    added, removed = b - a, a - b
    if len(added) == 1 and not removed:
        (t,) = added
        left, right = _neighbours(seg_from.taus, t, n)
        return prior.log_add_ratio(n, seg_from.k, left, right, t)
    if len(removed) == 1 and not added:
        (t,) = removed
        left, right = _neighbours(seg_to.taus, t, n)
        return -prior.log_add_ratio(n, seg_to.k, left, right, t)
    if len(added) == 1 and len(removed) == 1:
        (new,), (old,) = added, removed
        j = seg_from.taus.index(old)
        if seg_to.taus.index(new) != j:
            raise ValidationError("move crosses a neighbouring changepoint")
        left = seg_from.taus[j - 1] if j > 0 else 0
        right = seg_from.taus[j + 1] if j + 1 < seg_from.k else n
        return prior.log_move_ratio(left, right, old, new)
    if not added and not removed:
        return 0.0
    raise ValidationError("segmentations differ by more than one add, delete or move")


@dataclass(frozen=True)
class KPrior:
    """Prior on the number of changepoints with finite support ``0..kmax``."""

    weights: tuple[float, ...]
    variant: str = "custom"
    log_weights: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
            raise ValidationError("k prior weights must be finite, nonnegative and not all zero")
        w = w / w.sum()
        object.__setattr__(self, "weights", tuple(w.tolist()))
        with np.errstate(divide="ignore"):
            object.__setattr__(self, "log_weights", tuple(np.log(w).tolist()))

    @classmethod
    def uniform(cls, kmax: int) -> "KPrior":
        if kmax < 0:
            raise ValidationError("kmax must be >= 0")
        return cls((1.0,) * (kmax + 1), variant="uniform")

    @classmethod
    def truncated_poisson(cls, mean: float, kmax: int) -> "KPrior":
        return cls(tuple(sps.poisson.pmf(np.arange(kmax + 1), mean)), variant=f"poisson({mean})")

    @property
    def kmax(self) -> int:
        return len(self.weights) - 1

    def log_pmf(self, k: int) -> float:
        if 0 <= k < len(self.log_weights):
            return self.log_weights[k]
        return NEG_INF


@dataclass(frozen=True)
class PointProcess:
    """Segment-duration distribution over ``d >= 1``.

    ``geometric``: g(d) = p (1-p)^(d-1). ``negbin``: number of failures before
    the r-th success, shifted by one so the support starts at 1 (r=1 is the
    geometric). ``first`` optionally overrides the distribution of the first
    changepoint after time 0; it defaults to the process itself.
    """

    kind: str
    p: float
    r: float = 1.0
    first: "PointProcess | None" = None

    def __post_init__(self):
        if self.kind not in ("geometric", "negbin"):
            raise ValidationError(f"unknown point process {self.kind!r}")
        if not 0.0 < self.p <= 1.0:
            raise ValidationError(f"point process needs 0 < p <= 1, got {self.p}")
        if self.r <= 0:
            raise ValidationError("negative binomial needs r > 0")

    @classmethod
    def geometric(cls, p: float) -> "PointProcess":
        return cls("geometric", p)

    @classmethod
    def negbin(cls, r: float, p: float) -> "PointProcess":
        return cls("negbin", p, r)

    @property
    def initial(self) -> "PointProcess":
        return self.first if self.first is not None else self

    def log_pmf(self, d) -> np.ndarray:
        d = np.asarray(d)
        if np.any(d < 1):
            raise ValueError("durations start at 1")
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "geometric":
                out = math.log(self.p) + (d - 1) * (math.log1p(-self.p) if self.p < 1 else NEG_INF)
                if self.p == 1:
                    out = np.where(d == 1, 0.0, NEG_INF)
                return np.asarray(out, dtype=float)
            return sps.nbinom.logpmf(d - 1, self.r, self.p)

    def log_survival(self, d) -> np.ndarray:
        """``log(1 - G(d))`` for ``d >= 0``."""
        d = np.asarray(d)
        if np.any(d < 0):
            raise ValueError("durations are nonnegative")
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "geometric":
                if self.p == 1:
                    return np.where(d == 0, 0.0, NEG_INF)
                return np.asarray(d * math.log1p(-self.p), dtype=float)
            return np.where(d == 0, 0.0, sps.nbinom.logsf(d - 1, self.r, self.p))

    def pmf(self, d) -> np.ndarray:
        return np.exp(self.log_pmf(d))

    def cdf(self, d) -> np.ndarray:
        d = np.asarray(d)
        if self.kind == "geometric":
            return -np.expm1(d * math.log1p(-self.p)) if self.p < 1 else np.where(d >= 1, 1.0, 0.0)
        return np.where(d < 1, 0.0, sps.nbinom.cdf(d - 1, self.r, self.p))


def point_process_pmf(proc: PointProcess, d: int) -> float:
    if d < 1:
        raise ValueError("duration must be >= 1")
    return float(proc.pmf(d))


def point_process_cdf(proc: PointProcess, d: int) -> float:
    if d < 0:
        raise ValueError("duration must be >= 0")
    return float(proc.cdf(d))
