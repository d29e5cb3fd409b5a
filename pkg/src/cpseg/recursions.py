"""Backward filtering recursions, exact forward simulation of changepoints,
and the independence-proposal MCMC that uses such a sample as its proposal.

``R(t) = Pr(y_t..y_n | changepoint at t-1)`` is filled from ``t = n`` down to
``t = 1`` with ``R(n+1) = 1``:

    R(t) = sum_{s=t..n} m(t, s) R(s+1) g(s-t+1) + m(t, n) (1 - G(n-t+1))

and at ``t = 1`` the first-duration distribution ``g0``/``G0`` replaces
``g``/``G`` with the sum stopping at ``s = n-1``. With ``R(n+1) = 1`` the
``s = n`` term folds into the tail, so the censoring of the last segment
matches the geometric segmentation prior ``p^k (1-p)^(n-1-k)`` exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .core import SufficientStats, validate_segmentation
from .models import SegmentModel
from .priors import KPrior, PointProcess, SegPrior
from .sampler import ChainOutput, ChangepointSampler, SamplerConfig


class NumericalConsistencyError(FloatingPointError):
    pass


@dataclass(frozen=True)
class RecursionTable:
    """``log_r[t]`` holds ``log R(t)`` for ``t = 1..n+1``; index 0 is unused."""

    log_r: np.ndarray
    stats: SufficientStats
    model: SegmentModel
    proc: PointProcess
    max_duration: int | None = None

    @property
    def n(self) -> int:
        return self.stats.n

    @cached_property
    def _batch(self):
        return self.model.batch_scorer(self.stats)

    @property
    def log_evidence(self) -> float:
        return float(self.log_r[1])

    def next_changepoint(self, t: int) -> tuple[np.ndarray, np.ndarray, float]:
        """Distribution of the next changepoint given the last one is at ``t``
        (``0 <= t <= n-1``): candidate positions, their probabilities, and the
        probability of no further changepoint."""
        n = self.n
        lr = self.log_r
        proc = self.proc.initial if t == 0 else self.proc
        hi = n - 1
        if self.max_duration is not None:
            hi = min(hi, t + self.max_duration)
        taus = np.arange(t + 1, hi + 1)
        lm = self._batch(t + 1, taus)
        lp = lm + lr[taus + 1] + proc.log_pmf(taus - t) - lr[t + 1]
        tail = (self._batch(np.array([t + 1]), np.array([n]))[0]
                + float(proc.log_survival(n - t - 1)) - lr[t + 1])
        probs = np.exp(lp)
        tail_p = math.exp(tail)
        total = probs.sum() + tail_p
        if not abs(total - 1.0) <= 1e-8:
            raise NumericalConsistencyError(
                f"next-changepoint mass after t={t} sums to {total!r}")
        return taus, probs / total, tail_p / total


def compute_recursions(stats: SufficientStats, model: SegmentModel, proc: PointProcess,
                       truncate_tol: float | None = None) -> RecursionTable:
    """Backward pass in log space; O(n^2) segment evaluations.

    ``truncate_tol`` drops durations whose prior survival ``1 - G(d)`` is
    below the tolerance (off by default).
    """
    n = stats.n
    first = proc.initial
    d_max = None
    if truncate_tol is not None:
        d = np.arange(1, n + 1)
        below = np.flatnonzero(proc.log_survival(d) < math.log(truncate_tol))
        d_max = int(d[below[0]]) if below.size else None
    log_r = np.full(n + 2, np.nan)
    log_r[n + 1] = 0.0
    lm = model.batch_scorer(stats)
    for t in range(n, 0, -1):
        g = first if t == 1 else proc
        hi = n - 1 if t == 1 else n
        if d_max is not None:
            hi = min(hi, t + d_max - 1)
        s = np.arange(t, hi + 1)
        terms = (lm(t, s) + log_r[s + 1]
                 + g.log_pmf(s - t + 1))
        tail_len = n - 1 if t == 1 else n - t + 1
        tail = (lm(np.array([t]), np.array([n]))[0]
                + float(g.log_survival(tail_len)))
        log_r[t] = logsumexp(np.append(terms, tail))
        if math.isnan(log_r[t]):
            raise FloatingPointError(f"recursion produced NaN at t={t}")
    return RecursionTable(log_r=log_r, stats=stats, model=model, proc=proc, max_duration=d_max)


@dataclass(frozen=True)
class RecursionSampleSet:
    """``N`` segmentations in compressed form: sample ``i`` has changepoints
    ``positions[offsets[i]:offsets[i+1]]`` (1-based, sorted)."""

    n: int
    offsets: np.ndarray
    positions: np.ndarray

    def __len__(self) -> int:
        return int(self.offsets.size - 1)

    def __getitem__(self, i: int) -> tuple[int, ...]:
        return tuple(self.positions[self.offsets[i]:self.offsets[i + 1]].tolist())

    @property
    def k(self) -> np.ndarray:
        return np.diff(self.offsets)

    def segmentations(self) -> list[tuple[int, ...]]:
        pos = self.positions.tolist()
        off = self.offsets.tolist()
        return [tuple(pos[off[i]:off[i + 1]]) for i in range(len(self))]

    def keys(self) -> np.ndarray:
        if self.n > 63:
            raise ValueError("bitmask keys need n <= 63")
        ids = np.repeat(np.arange(len(self)), self.k)
        keys = np.zeros(len(self), dtype=np.int64)
        np.add.at(keys, ids, np.left_shift(np.int64(1), self.positions - 1))
        return keys

    def k_dist(self, kmax: int | None = None) -> np.ndarray:
        k = self.k
        size = (kmax if kmax is not None else int(k.max(initial=0))) + 1
        return np.bincount(k, minlength=size)[:size] / len(self)

    def pos_prob(self) -> np.ndarray:
        return np.bincount(self.positions - 1, minlength=self.n - 1)[: self.n - 1] / len(self)

    @classmethod
    def from_segmentations(cls, segs: Sequence[Sequence[int]], n: int) -> "RecursionSampleSet":
        for seg in segs:
            validate_segmentation(tuple(seg), n)
        k = np.array([len(s) for s in segs], dtype=np.int64)
        offsets = np.concatenate(([0], np.cumsum(k)))
        positions = np.array([t for s in segs for t in s], dtype=np.int64)
        return cls(n=n, offsets=offsets, positions=positions)


def sample_changepoints(table: RecursionTable, N: int, rng: np.random.Generator) -> RecursionSampleSet:
    """``N`` independent posterior draws by grouped forward simulation: all
    samples whose last changepoint is ``t`` share one next-changepoint
    distribution."""
    if N < 1:
        raise ValueError("N must be >= 1")
    n = table.n
    pending: dict[int, list[np.ndarray]] = {0: [np.arange(N)]}
    ev_ids, ev_pos = [], []
    for t in range(0, n - 1):
        groups = pending.pop(t, None)
        if not groups:
            continue
        ids = np.concatenate(groups)
        taus, probs, _tail = table.next_changepoint(t)
        cdf = np.cumsum(probs)
        idx = np.searchsorted(cdf, rng.random(ids.size), side="right")
        hit = idx < taus.size
        if not hit.any():
            continue
        ids, nxt = ids[hit], taus[idx[hit]]
        ev_ids.append(ids)
        ev_pos.append(nxt)
        order = np.argsort(nxt, kind="stable")
        ids, nxt = ids[order], nxt[order]
        cuts = np.flatnonzero(np.diff(nxt)) + 1
        for chunk_ids, chunk_pos in zip(np.split(ids, cuts), np.split(nxt, cuts)):
            pending.setdefault(int(chunk_pos[0]), []).append(chunk_ids)
    if ev_ids:
        all_ids = np.concatenate(ev_ids)
        all_pos = np.concatenate(ev_pos)
        order = np.lexsort((all_pos, all_ids))
        all_ids, all_pos = all_ids[order], all_pos[order]
    else:
        all_ids = all_pos = np.zeros(0, dtype=np.int64)
    counts = np.bincount(all_ids, minlength=N)
    offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    return RecursionSampleSet(n=n, offsets=offsets, positions=all_pos.astype(np.int64))


def independence_mcmc(pool: RecursionSampleSet, stats: SufficientStats, model: SegmentModel,
                      seg_prior: SegPrior, k_prior: KPrior, sweeps: int,
                      rng: np.random.Generator, config: SamplerConfig | None = None) -> ChainOutput:
    """Metropolis-Hastings whose segmentation proposal is a uniform draw from
    ``pool`` (so each distinct segmentation is proposed with its pool
    frequency), followed by the same ``p`` and hyperparameter updates as the
    collapsed sampler when ``config`` enables them."""
    if len(pool) == 0:
        raise ValueError("proposal pool is empty")
    if pool.n != stats.n:
        raise ValueError("pool and data lengths differ")
    cfg = config or SamplerConfig()
    segs = pool.segmentations()
    counts: dict[tuple[int, ...], int] = {}
    for seg in segs:
        counts[seg] = counts.get(seg, 0) + 1
    log_q = {seg: math.log(c / len(segs)) for seg, c in counts.items()}

    kmax = max(len(s) for s in segs)
    cfg_k = replace(cfg, kmax=max(kmax, cfg.kmax or 0))
    current = segs[int(rng.random() * len(segs))]
    sampler = ChangepointSampler(stats, model, seg_prior, k_prior, cfg_k, init=current, rng=rng)
    st = sampler.state
    st.move_stats["independence"] = [0, 0]

    def log_post(seg):
        lm = sampler._lm
        edges = (0, *seg, stats.n)
        return (k_prior.log_pmf(len(seg)) + st.seg_prior.log_prior(seg, stats.n)
                + math.fsum(lm(a + 1, b) for a, b in zip(edges[:-1], edges[1:])))

    names = st.model.hyper_names
    rec_sweep, rec_k, rec_taus, rec_p, rec_lp = [], [], [], [], []
    rec_h = {name: [] for name in names}
    seen = {current}
    thin = cfg.thin
    for it in range(1, cfg.burn_in + sweeps + 1):
        proposal = segs[int(rng.random() * len(segs))]
        u = rng.random()
        st.move_stats["independence"][0] += 1
        if proposal != current:
            log_a = (log_post(proposal) - log_q[proposal]) - (st.log_post - log_q[current])
            if log_a >= 0 or u < math.exp(log_a):
                sampler.set_segmentation(proposal)
                current = proposal
                st.move_stats["independence"][1] += 1
        else:
            st.move_stats["independence"][1] += 1
        if cfg.update_p:
            sampler.update_p()
        if cfg.update_gamma:
            sampler.update_gamma()
        if it <= cfg.burn_in:
            continue
        seen.add(current)
        j = it - cfg.burn_in
        if j % thin == 0:
            rec_sweep.append(j)
            rec_k.append(len(current))
            rec_taus.append(current)
            rec_p.append(st.p)
            rec_lp.append(st.log_post)
            for name, value in st.model.hyper().items():
                rec_h[name].append(value)
    return sampler._output(rec_sweep, rec_k, rec_taus, rec_p, rec_lp, rec_h, len(seen))
