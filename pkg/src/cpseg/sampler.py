"""Collapsed Metropolis-Hastings sampler over segmentations.

Segment parameters are integrated out, so the chain moves on the number and
positions of changepoints only. One sweep is:

1. add or delete a changepoint (probabilities ``a_k`` and ``1 - a_k``);
2. if ``k >= 1``, pick a changepoint uniformly and resample its position by
   a Gibbs draw (probability ``g_k``, default ``1/sqrt(k)``) or a local
   random-walk proposal;
3. optionally draw ``p`` from its Beta full conditional (geometric prior);
4. optionally draw segment parameters, update the model hyperparameters
   given them, and discard the draws.

Random draws within a sweep happen in a fixed order: add/delete choice,
position, acceptance uniform; then changepoint index, Gibbs-vs-walk uniform,
move draw(s); then ``p``; then segment parameters in segment order followed
by the hyperparameter draws. Same seed and config give identical chains.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Segmentation, SufficientStats, validate_segmentation
from .hyper import Hyperprior, default_hyperprior, update_gaussian_hyperparams  # noqa: F401
from .models import SegmentModel
from .priors import KPrior, SegPrior

MOVES = ("add", "delete", "gibbs", "random_walk")

# below this many candidate positions the Gibbs move uses scalar arithmetic
_SCALAR_GIBBS_MAX = 32
# segment log marginals are tabulated up front when gamma is fixed and n is at most this
_TABLE_MAX_N = 400


def log_collapsed_posterior(seg: Segmentation | Sequence[int], stats: SufficientStats,
                            model: SegmentModel, seg_prior: SegPrior, k_prior: KPrior) -> float:
    """Unnormalised ``log pi(k) + log pi(z | k) + sum_j log m(segment j)``."""
    taus = seg.taus if isinstance(seg, Segmentation) else tuple(seg)
    validate_segmentation(taus, stats.n)
    total = k_prior.log_pmf(len(taus)) + seg_prior.log_prior(taus, stats.n)
    if total == -math.inf:
        return total
    edges = (0, *taus, stats.n)
    for a, b in zip(edges[:-1], edges[1:]):
        total += model.log_marginal(stats, a + 1, b)
    if math.isnan(total):
        raise FloatingPointError(f"log posterior is NaN at taus={taus}")
    return total


@dataclass
class SamplerConfig:
    """Run controls. ``kmax=None`` means ``min(k_prior.kmax, n - 1)``;
    ``gibbs_prob=None`` means ``1/sqrt(k)``."""

    kmax: int | None = None
    add_prob: float = 0.5
    window: int = 10
    gibbs_prob: float | None = None
    sweeps: int = 10_000
    burn_in: int = 0
    thin: int = 1
    seed: int | None = 0
    update_p: bool = False
    p_prior: tuple[float, float] = (1.0, 1.0)
    update_gamma: bool = False
    hyperprior: Hyperprior | None = None

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.thin < 1 or self.sweeps < 0 or self.burn_in < 0:
            raise ValueError("need sweeps, burn_in >= 0 and thin >= 1")
        if not 0.0 <= self.add_prob <= 1.0:
            raise ValueError("add_prob must lie in [0, 1]")
        if self.gibbs_prob is not None and not 0.0 <= self.gibbs_prob <= 1.0:
            raise ValueError("gibbs_prob must lie in [0, 1]")

    def add_schedule(self, kmax: int) -> list[float]:
        """``a_k`` for ``k = 0..kmax`` with ``a_0 = 1`` and ``a_kmax = 0``."""
        if kmax == 0:
            return [0.0]
        a = [self.add_prob] * (kmax + 1)
        a[0], a[kmax] = 1.0, 0.0
        return a


@dataclass
class Proposal:
    kind: str
    t: int
    index: int
    log_ratio: float
    taus: tuple[int, ...]
    new_lm: tuple[float, ...]

    @property
    def new_seg(self) -> Segmentation:
        return Segmentation(self.taus)


@dataclass
class SamplerState:
    taus: list[int]
    seg_lm: list[float]
    model: SegmentModel
    seg_prior: SegPrior
    log_post: float
    move_stats: dict[str, list[int]] = field(default_factory=lambda: {m: [0, 0] for m in MOVES})

    @property
    def k(self) -> int:
        return len(self.taus)

    @property
    def seg(self) -> Segmentation:
        return Segmentation(tuple(self.taus))

    @property
    def p(self) -> float:
        return getattr(self.seg_prior, "p", math.nan)


@dataclass
class ChainOutput:
    n: int
    sweep: np.ndarray
    k: np.ndarray
    taus: list[tuple[int, ...]]
    p: np.ndarray
    hyper: dict[str, np.ndarray]
    log_post: np.ndarray
    acceptance: dict[str, float]
    move_counts: dict[str, tuple[int, int]]
    unique_visited: int = 0

    def __len__(self) -> int:
        return len(self.taus)

    def keys(self) -> np.ndarray:
        """Bitmask code of each recorded segmentation (bit ``t-1`` set iff ``t`` is a changepoint)."""
        if self.n > 63:
            raise ValueError("bitmask keys need n <= 63")
        return np.array([sum(1 << (t - 1) for t in taus) for taus in self.taus], dtype=np.int64)

    def pos_prob(self) -> np.ndarray:
        counts = np.zeros(self.n - 1)
        for taus in self.taus:
            if taus:
                counts[np.asarray(taus) - 1] += 1
        return counts / max(len(self.taus), 1)

    def k_dist(self, kmax: int | None = None) -> np.ndarray:
        size = (kmax if kmax is not None else int(self.k.max(initial=0))) + 1
        return np.bincount(self.k, minlength=size)[:size] / max(len(self.k), 1)


class ChangepointSampler:
    """Collapsed sampler for one chain.

    ``model`` carries the segment hyperparameters and ``seg_prior`` the
    segmentation prior (including ``p`` when geometric); both are updated in
    place on ``self.state`` when the corresponding flags are set.
    """

    def __init__(self, stats: SufficientStats, model: SegmentModel, seg_prior: SegPrior,
                 k_prior: KPrior, config: SamplerConfig | None = None,
                 init: Sequence[int] = (), rng: np.random.Generator | None = None):
        self.stats = stats
        self.n = stats.n
        self.k_prior = k_prior
        self.config = config or SamplerConfig()
        kmax = self.config.kmax if self.config.kmax is not None else k_prior.kmax
        self.kmax = min(kmax, self.n - 1)
        self.a = self.config.add_schedule(self.kmax)
        self.rng = rng if rng is not None else np.random.default_rng(self.config.seed)
        self.hyperprior = self.config.hyperprior
        if self.config.update_gamma and self.hyperprior is None:
            self.hyperprior = default_hyperprior(model)
        taus = sorted(int(t) for t in init)
        validate_segmentation(taus, self.n)
        if len(taus) > self.kmax:
            raise ValueError(f"initial segmentation has {len(taus)} > kmax={self.kmax} changepoints")
        self._z = bytearray(self.n + 1)
        for t in taus:
            self._z[t] = 1
        self.state = SamplerState(taus=taus, seg_lm=[], model=model, seg_prior=seg_prior, log_post=0.0)
        self._refresh()
        if self.state.log_post == -math.inf:
            raise ValueError("initial segmentation has zero posterior probability")

    # -- bookkeeping -------------------------------------------------------

    def _refresh(self) -> None:
        st = self.state
        self._lm = self._make_scorer(st.model)
        self._batch = st.model.batch_scorer(self.stats)
        edges = (0, *st.taus, self.n)
        st.seg_lm = [self._lm(a + 1, b) for a, b in zip(edges[:-1], edges[1:])]
        st.log_post = (self.k_prior.log_pmf(st.k) + st.seg_prior.log_prior(st.taus, self.n)
                       + math.fsum(st.seg_lm))

    def _make_scorer(self, model: SegmentModel):
        n = self.n
        if self.config.update_gamma or n > _TABLE_MAX_N:
            return model.scorer(self.stats)
        # fixed hyperparameters and small n: tabulate every segment once
        s, t = np.triu_indices(n + 1)
        keep = s >= 1
        s, t = s[keep], t[keep]
        table = np.full((n + 2) * (n + 1), np.nan)
        table[s * (n + 1) + t] = model._many(self.stats, s, t)
        flat = table.tolist()
        w = n + 1
        return lambda a, b: flat[a * w + b]

    def set_segmentation(self, taus: Sequence[int]) -> None:
        taus = sorted(int(t) for t in taus)
        validate_segmentation(taus, self.n)
        for t in self.state.taus:
            self._z[t] = 0
        for t in taus:
            self._z[t] = 1
        self.state.taus = taus
        edges = (0, *taus, self.n)
        st = self.state
        st.seg_lm = [self._lm(a + 1, b) for a, b in zip(edges[:-1], edges[1:])]
        st.log_post = (self.k_prior.log_pmf(st.k) + st.seg_prior.log_prior(st.taus, self.n)
                       + math.fsum(st.seg_lm))

    def set_data(self, stats: SufficientStats) -> None:
        """Swap in a new series of the same length, keeping the chain state."""
        if stats.n != self.n:
            raise ValueError("new series must have the same length")
        self.stats = stats
        self._refresh()

    def recompute_log_post(self) -> float:
        st = self.state
        return log_collapsed_posterior(st.taus, self.stats, st.model, st.seg_prior, self.k_prior)

    def _accept(self, log_ratio: float) -> bool:
        u = self.rng.random()
        return log_ratio >= 0.0 or u < math.exp(log_ratio)

    def _neighbours(self, i: int) -> tuple[int, int]:
        taus = self.state.taus
        left = taus[i - 1] if i > 0 else 0
        right = taus[i + 1] if i + 1 < len(taus) else self.n
        return left, right

    # -- add / delete ------------------------------------------------------

    def _log_add_ratio(self, k: int, left: int, right: int, t: int,
                       lm_old: float, lm_l: float, lm_r: float) -> float:
        """log A for adding ``t`` between ``left`` and ``right`` to a ``k``-changepoint state."""
        st = self.state
        lk = self.k_prior.log_pmf(k + 1) - self.k_prior.log_pmf(k)
        lz = st.seg_prior.log_add_ratio(self.n, k, left, right, t)
        if lk == -math.inf or lz == -math.inf:
            return -math.inf
        a_k = self.a[k]
        d_k1 = 1.0 - self.a[k + 1]
        return (lk + lz + lm_l + lm_r - lm_old
                + math.log(d_k1 / (k + 1)) - math.log(a_k / (self.n - k - 1)))

    def propose_add(self) -> Proposal | None:
        st = self.state
        k = st.k
        if k >= self.kmax or self.n - k - 1 <= 0:
            return None
        z = self._z
        span = self.n - 1
        while True:
            t = 1 + int(self.rng.random() * span)
            if not z[t]:
                break
        j = bisect.bisect_left(st.taus, t)
        left = st.taus[j - 1] if j > 0 else 0
        right = st.taus[j] if j < k else self.n
        lm_l = self._lm(left + 1, t)
        lm_r = self._lm(t + 1, right)
        log_a = self._log_add_ratio(k, left, right, t, st.seg_lm[j], lm_l, lm_r)
        taus = tuple(st.taus[:j]) + (t,) + tuple(st.taus[j:])
        return Proposal("add", t, j, log_a, taus, (lm_l, lm_r))

    def propose_delete(self) -> Proposal | None:
        st = self.state
        k = st.k
        if k == 0:
            return None
        i = int(self.rng.random() * k)
        t = st.taus[i]
        left, right = self._neighbours(i)
        lm_merged = self._lm(left + 1, right)
        log_a = self._log_add_ratio(k - 1, left, right, t, lm_merged, st.seg_lm[i], st.seg_lm[i + 1])
        taus = tuple(st.taus[:i]) + tuple(st.taus[i + 1:])
        return Proposal("delete", t, i, -log_a, taus, (lm_merged,))

    def apply(self, prop: Proposal) -> None:
        st = self.state
        old_lm = math.fsum(st.seg_lm[prop.index:prop.index + (1 if prop.kind == "add" else 2)])
        if prop.kind == "add":
            st.taus.insert(prop.index, prop.t)
            st.seg_lm[prop.index:prop.index + 1] = prop.new_lm
            self._z[prop.t] = 1
        else:
            del st.taus[prop.index]
            st.seg_lm[prop.index:prop.index + 2] = prop.new_lm
            self._z[prop.t] = 0
        # the Hastings terms are not part of the posterior; rebuild the prior change
        k_new = st.k
        k_old = k_new - 1 if prop.kind == "add" else k_new + 1
        st.log_post += (self.k_prior.log_pmf(k_new) - self.k_prior.log_pmf(k_old)
                        + math.fsum(prop.new_lm) - old_lm)
        left = st.taus[prop.index - 1] if prop.index > 0 else 0
        if prop.kind == "add":
            right = st.taus[prop.index + 1] if prop.index + 1 < k_new else self.n
            st.log_post += st.seg_prior.log_add_ratio(self.n, k_old, left, right, prop.t)
        else:
            right = st.taus[prop.index] if prop.index < k_new else self.n
            st.log_post -= st.seg_prior.log_add_ratio(self.n, k_new, left, right, prop.t)

    def add_delete_step(self) -> None:
        st = self.state
        if self.kmax == 0:
            return
        if self.rng.random() < self.a[st.k]:
            prop = self.propose_add()
        else:
            prop = self.propose_delete()
        if prop is None:
            return
        counts = st.move_stats[prop.kind]
        counts[0] += 1
        if self._accept(prop.log_ratio):
            counts[1] += 1
            self.apply(prop)

    # -- moves -------------------------------------------------------------

    def gibbs_conditional(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Candidate positions, normalised probabilities and both segment
        log marginals for the full conditional of changepoint ``i`` (0-based)."""
        st = self.state
        left, right = self._neighbours(i)
        ts = np.arange(left + 1, right)
        lm_l, lm_r = self._batch.split(left, right)
        w = lm_l + lm_r + st.seg_prior.log_move_weights(left, right, ts)
        w = np.exp(w - w.max())
        return ts, w / w.sum(), lm_l, lm_r

    def move_gibbs(self, i: int) -> None:
        st = self.state
        counts = st.move_stats["gibbs"]
        counts[0] += 1
        counts[1] += 1
        left, right = self._neighbours(i)
        size = right - left - 1
        if size <= 1:
            return
        if size <= _SCALAR_GIBBS_MAX:
            lm = self._lm
            prior_w = st.seg_prior.log_move_weight
            a = left + 1
            lls = [lm(a, t) for t in range(a, right)]
            lrs = [lm(t + 1, right) for t in range(a, right)]
            ws = [x + y + prior_w(left, right, t) for t, x, y in zip(range(a, right), lls, lrs)]
            top = max(ws)
            ps = [math.exp(w - top) for w in ws]
            u = self.rng.random() * math.fsum(ps)
            idx = 0
            acc = ps[0]
            while acc <= u and idx < size - 1:
                idx += 1
                acc += ps[idx]
            self._set_position(i, a + idx, lls[idx], lrs[idx])
            return
        lm_l, lm_r = self._batch.split(left, right)
        w = lm_l + lm_r + st.seg_prior.log_span_weights(left, right)
        cdf = np.cumsum(np.exp(w - w.max()))
        idx = int(np.searchsorted(cdf, self.rng.random() * cdf[-1], side="right"))
        idx = min(idx, size - 1)
        self._set_position(i, left + 1 + idx, float(lm_l[idx]), float(lm_r[idx]))

    def _set_position(self, i: int, t: int, lm_l: float, lm_r: float) -> None:
        st = self.state
        old = st.taus[i]
        if t == old:
            return
        left, right = self._neighbours(i)
        st.log_post += (lm_l + lm_r - st.seg_lm[i] - st.seg_lm[i + 1]
                        + st.seg_prior.log_move_ratio(left, right, old, t))
        st.taus[i] = t
        st.seg_lm[i], st.seg_lm[i + 1] = lm_l, lm_r
        self._z[old] = 0
        self._z[t] = 1

    def _window_size(self, x: int, left: int, right: int, l: int) -> int:
        return min(x + l, right - 1) - max(x - l, left + 1) + 1

    def random_walk_log_ratio(self, i: int, t: int) -> tuple[float, float, float]:
        """log B for moving changepoint ``i`` to ``t``, including the
        correction for a window clipped at a neighbour."""
        st = self.state
        old = st.taus[i]
        left, right = self._neighbours(i)
        l = self.config.window
        lm_l = self._lm(left + 1, t)
        lm_r = self._lm(t + 1, right)
        lz = st.seg_prior.log_move_ratio(left, right, old, t)
        if lz == -math.inf:
            return -math.inf, lm_l, lm_r
        log_b = (lm_l + lm_r - st.seg_lm[i] - st.seg_lm[i + 1] + lz
                 + math.log(self._window_size(old, left, right, l))
                 - math.log(self._window_size(t, left, right, l)))
        return log_b, lm_l, lm_r

    def move_random_walk(self, i: int) -> None:
        st = self.state
        counts = st.move_stats["random_walk"]
        counts[0] += 1
        old = st.taus[i]
        left, right = self._neighbours(i)
        l = self.config.window
        lo, hi = max(old - l, left + 1), min(old + l, right - 1)
        t = lo + int(self.rng.random() * (hi - lo + 1))
        if t == old:
            self._accept(0.0)
            counts[1] += 1
            return
        log_b, lm_l, lm_r = self.random_walk_log_ratio(i, t)
        if self._accept(log_b):
            counts[1] += 1
            self._set_position(i, t, lm_l, lm_r)

    def move_step(self) -> None:
        k = self.state.k
        if k == 0:
            return
        i = int(self.rng.random() * k)
        g = self.config.gibbs_prob if self.config.gibbs_prob is not None else 1.0 / math.sqrt(k)
        if self.rng.random() < g:
            self.move_gibbs(i)
        else:
            self.move_random_walk(i)

    # -- hyperparameters ---------------------------------------------------

    def update_p(self) -> None:
        st = self.state
        if not st.seg_prior.has_p:
            return
        a1, a2 = self.config.p_prior
        k = st.k
        p = float(self.rng.beta(a1 + k, a2 + self.n - 1 - k))
        p = min(max(p, 1e-300), 1.0 - 1e-16)
        new_prior = st.seg_prior.with_p(p)
        st.log_post += new_prior.log_prior(st.taus, self.n) - st.seg_prior.log_prior(st.taus, self.n)
        st.seg_prior = new_prior

    def update_gamma(self) -> None:
        st = self.state
        bounds = Segmentation(tuple(st.taus)).bounds(self.n)
        theta = [st.model.sample_param(self.stats, s, t, self.rng) for s, t in bounds]
        st.model = self.hyperprior.update(st.model, self.stats, bounds, theta, self.rng)
        self._refresh()

    def sweep(self) -> None:
        self.add_delete_step()
        self.move_step()
        if self.config.update_p:
            self.update_p()
        if self.config.update_gamma:
            self.update_gamma()

    # -- driver ------------------------------------------------------------

    def run(self, sweeps: int | None = None, burn_in: int | None = None,
            thin: int | None = None) -> ChainOutput:
        cfg = self.config
        sweeps = cfg.sweeps if sweeps is None else sweeps
        burn_in = cfg.burn_in if burn_in is None else burn_in
        thin = cfg.thin if thin is None else thin
        for _ in range(burn_in):
            self.sweep()
        names = self.state.model.hyper_names
        rec_sweep, rec_k, rec_taus, rec_p, rec_lp = [], [], [], [], []
        rec_h = {name: [] for name in names}
        seen = set()
        st = self.state
        for it in range(1, sweeps + 1):
            self.sweep()
            seen.add(tuple(st.taus))
            if it % thin == 0:
                rec_sweep.append(it)
                rec_k.append(st.k)
                rec_taus.append(tuple(st.taus))
                rec_p.append(st.p)
                rec_lp.append(st.log_post)
                for name, value in st.model.hyper().items():
                    rec_h[name].append(value)
        return self._output(rec_sweep, rec_k, rec_taus, rec_p, rec_lp, rec_h, len(seen))

    def _output(self, rec_sweep, rec_k, rec_taus, rec_p, rec_lp, rec_h, unique) -> ChainOutput:
        ms = self.state.move_stats
        return ChainOutput(
            n=self.n,
            sweep=np.asarray(rec_sweep, dtype=np.int64),
            k=np.asarray(rec_k, dtype=np.int64),
            taus=rec_taus,
            p=np.asarray(rec_p, dtype=float),
            hyper={name: np.asarray(v, dtype=float) for name, v in rec_h.items()},
            log_post=np.asarray(rec_lp, dtype=float),
            acceptance={m: (c[1] / c[0] if c[0] else math.nan) for m, c in ms.items()},
            move_counts={m: (c[0], c[1]) for m, c in ms.items()},
            unique_visited=unique,
        )


def run_chain(stats: SufficientStats, model: SegmentModel, seg_prior: SegPrior,
              k_prior: KPrior, config: SamplerConfig, init: Sequence[int] = ()) -> ChainOutput:
    return ChangepointSampler(stats, model, seg_prior, k_prior, config, init).run()


def _run_seeded(args):
    stats, model, seg_prior, k_prior, config, init, seed = args
    from dataclasses import replace

    return run_chain(stats, model, seg_prior, k_prior, replace(config, seed=seed), init)


def run_chains(stats, model, seg_prior, k_prior, config: SamplerConfig, seeds: Sequence[int],
               init: Sequence[int] = (), workers: int = 1) -> list[ChainOutput]:
    """Independent chains, one per seed; outputs are returned in seed order."""
    jobs = [(stats, model, seg_prior, k_prior, config, tuple(init), s) for s in seeds]
    if workers <= 1:
        return [_run_seeded(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_seeded, jobs))
