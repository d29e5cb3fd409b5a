"""Time series container, segmentations and prefix-sum sufficient statistics.

All positions are 1-based: observations are ``y_1..y_n`` and a changepoint at
``tau`` means ``y_tau`` is the last point of a segment, so ``tau`` ranges over
``1..n-1``. Segment ``(s, t)`` is the inclusive range ``y_s..y_t``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class ValidationError(ValueError):
    """Raised for malformed series or segmentations."""


class DataKind(str, enum.Enum):
    COUNTS = "counts"
    BINARY = "binary"
    REAL = "real"


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    kind: DataKind

    def __post_init__(self):
        kind = DataKind(self.kind)
        object.__setattr__(self, "kind", kind)
        raw = np.asarray(self.values)
        if raw.ndim != 1:
            raise ValidationError("values must be one-dimensional")
        if raw.size < 2:
            raise ValidationError(f"need at least 2 observations, got {raw.size}")
        vals = raw.astype(float)
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            raise ValidationError(f"non-finite value at index {bad[0] + 1}")
        if kind is DataKind.REAL:
            arr = vals
        else:
            nonint = np.flatnonzero((vals != np.round(vals)) | (vals < 0))
            if nonint.size:
                i = nonint[0]
                raise ValidationError(
                    f"index {i + 1}: {kind.value} data must be nonnegative integers, got {vals[i]!r}"
                )
            arr = vals.astype(np.int64)
            if kind is DataKind.BINARY:
                big = np.flatnonzero(arr > 1)
                if big.size:
                    i = big[0]
                    raise ValidationError(f"index {i + 1}: binary data must be 0 or 1, got {arr[i]}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class Segmentation:
    """Sorted changepoint positions ``tau_1 < ... < tau_k`` (1-based)."""

    taus: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(int(t) for t in self.taus))

    @property
    def k(self) -> int:
        return len(self.taus)

    def to_z(self, n: int) -> np.ndarray:
        """Binary indicator vector ``z_1..z_n`` (returned 0-based, ``z[n-1] == 0``)."""
        validate_segmentation(self, n)
        z = np.zeros(n, dtype=np.int8)
        z[np.asarray(self.taus, dtype=int) - 1] = 1
        return z

    @classmethod
    def from_z(cls, z: Sequence[int]) -> "Segmentation":
        z = np.asarray(z)
        if z.size and z[-1] != 0:
            raise ValidationError("z_n must be 0")
        return cls(tuple(int(i) + 1 for i in np.flatnonzero(z)))

    def bounds(self, n: int) -> list[tuple[int, int]]:
        """Inclusive ``(start, end)`` of every segment."""
        edges = (0, *self.taus, n)
        return [(edges[j] + 1, edges[j + 1]) for j in range(len(edges) - 1)]


def validate_segmentation(seg: Segmentation | Iterable[int], n: int) -> None:
    taus = seg.taus if isinstance(seg, Segmentation) else tuple(seg)
    prev = 0
    for i, t in enumerate(taus):
        if t <= 0:
            raise ValidationError(f"changepoint {t} at slot {i} is not positive")
        if t >= n:
            raise ValidationError(f"changepoint {t} at slot {i} must be < n={n}")
        if t == prev:
            raise ValidationError(f"duplicate changepoint {t}")
        if t < prev:
            raise ValidationError(f"changepoints not sorted: {prev} before {t}")
        prev = t


def _compensated_cumsum(x: np.ndarray) -> np.ndarray:
    # Neumaier summation; plain cumsum loses digits at Well-log scale
    out = np.empty(x.size + 1)
    out[0] = 0.0
    s = 0.0
    c = 0.0
    for i, v in enumerate(x.tolist(), start=1):
        tmp = s + v
        if abs(s) >= abs(v):
            c += (s - tmp) + v
        else:
            c += (v - tmp) + s
        s = tmp
        out[i] = s + c
    return out


@dataclass(frozen=True)
class SufficientStats:
    """Prefix arrays of length ``n + 1`` with a leading zero.

    ``prefix_sumsq`` is present only for real data and ``prefix_logfact``
    (cumulative ``log y_i!``) only for counts. Real data are stored centred:
    the prefix arrays accumulate ``y_i - shift`` so that within-segment sums
    of squares do not cancel catastrophically at large offsets. The
    ``segment_*`` accessors undo the shift.
    """

    kind: DataKind
    n: int
    prefix_sum: np.ndarray
    prefix_sumsq: np.ndarray | None = None
    prefix_logfact: np.ndarray | None = None
    shift: float = 0.0
    # plain-list mirrors for scalar hot loops
    S: list = field(init=False, repr=False, compare=False)
    SS: list | None = field(init=False, repr=False, compare=False)
    LF: list | None = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("prefix_sum", "prefix_sumsq", "prefix_logfact"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "S", self.prefix_sum.tolist())
        object.__setattr__(self, "SS", None if self.prefix_sumsq is None else self.prefix_sumsq.tolist())
        object.__setattr__(self, "LF", None if self.prefix_logfact is None else self.prefix_logfact.tolist())

    def check_range(self, s: int, t: int) -> None:
        if not (1 <= s <= t <= self.n):
            raise IndexError(f"segment ({s}, {t}) outside 1..{self.n}")

    def segment_sum(self, s: int, t: int):
        self.check_range(s, t)
        x = self.S[t] - self.S[s - 1]
        return x + (t - s + 1) * self.shift if self.shift else x

    def segment_sumsq(self, s: int, t: int) -> float:
        self.check_range(s, t)
        c = self.shift
        x = self.S[t] - self.S[s - 1]
        return self.SS[t] - self.SS[s - 1] + 2.0 * c * x + (t - s + 1) * c * c

    def segment_logfact(self, s: int, t: int) -> float:
        self.check_range(s, t)
        return self.LF[t] - self.LF[s - 1]


def build_stats(series: TimeSeries) -> SufficientStats:
    vals = series.values
    if series.kind is DataKind.REAL:
        shift = float(np.median(vals))
        centred = vals - shift
        return SufficientStats(
            kind=series.kind,
            n=series.n,
            prefix_sum=_compensated_cumsum(centred),
            prefix_sumsq=_compensated_cumsum(centred * centred),
            shift=shift,
        )
    S = np.concatenate(([0], np.cumsum(vals, dtype=np.int64)))
    LF = None
    if series.kind is DataKind.COUNTS:
        LF = np.concatenate(([0.0], np.cumsum([math.lgamma(v + 1) for v in vals.tolist()])))
    return SufficientStats(kind=series.kind, n=series.n, prefix_sum=S, prefix_logfact=LF)
