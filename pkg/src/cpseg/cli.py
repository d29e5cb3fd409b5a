"""``cpseg`` command line: ingest a series, run one analysis, write JSON/CSV.

Config files are flat ``key = value`` text (``#`` starts a comment). Keys are
the fields of :class:`RunConfig`; ``--set key=value`` and the dedicated flags
override file values, and a ``preset`` key supplies defaults that the file
itself may override. The effective config is echoed to ``summary.json`` and
to ``config.txt``; running ``cpseg <mode> --config config.txt`` reproduces the
outputs exactly.

Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical error. Failures
print a JSON object ``{"error", "message", "exit_code"}`` on stderr.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .analysis import enumerate_exact_posterior, modal_k, sensitivity_sweep, summarize
from .core import DataKind, TimeSeries, ValidationError, build_stats
from .hyper import BetaShapeHyperprior, GaussianHyperprior, PoissonRateHyperprior
from .models import MODELS, SegmentModel
from .priors import EvenOrderStatsPrior, GeometricPrior, KPrior, PointProcess
from .recursions import compute_recursions, sample_changepoints
from .sampler import ChangepointSampler, SamplerConfig

MODES = ("sample", "recurse", "sweep", "enumerate")
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass
class RunConfig:
    # data
    input: str = ""
    kind: str = "real"
    events: bool = False
    start_date: str = ""
    end_date: str = ""
    bin_days: int = 7
    # segment model and its hyperparameters
    model: str = "gaussian"
    rho: float = 1.0
    lam: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    sigma: float = 1.0
    mu0: float = 0.0
    nu: float = 1.0
    update_gamma: bool = False
    sigma2_shape: float = 0.0
    sigma2_scale: float = 0.0
    nu2_shape: float = 0.0
    nu2_scale: float = 0.0
    mu0_mean: float = 0.0
    mu0_var: float = math.inf
    lam_shape: float = 0.0
    lam_rate: float = 0.0
    beta_shape_shape: float = 1.0
    beta_shape_rate: float = 1.0
    beta_shape_step: float = 0.5
    # segmentation prior and k prior
    seg_prior: str = "geometric"
    p: float = 0.01
    update_p: bool = False
    p_a: float = 1.0
    p_b: float = 1.0
    k_prior: str = "uniform"
    k_mean: float = 3.0
    kmax: int = -1
    # sampler
    sweeps: int = 10_000
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    window: int = 10
    add_prob: float = 0.5
    gibbs_prob: float = -1.0
    # recursions
    draws: int = 100_000
    process: str = "geometric"
    process_r: float = 1.0
    truncate_tol: float = -1.0
    # sweep
    sweep_param: str = "p"
    sweep_grid: str = ""

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {sorted(MODELS)}, got {self.model!r}")
        if self.kind not in {k.value for k in DataKind}:
            raise ConfigError(f"unknown data kind {self.kind!r}")
        if MODELS[self.model].kind.value != self.kind:
            raise ConfigError(f"model {self.model!r} needs kind={MODELS[self.model].kind.value}")
        if self.seg_prior not in ("geometric", "even_order"):
            raise ConfigError(f"seg_prior must be geometric or even_order, got {self.seg_prior!r}")
        if self.k_prior not in ("uniform", "poisson"):
            raise ConfigError(f"k_prior must be uniform or poisson, got {self.k_prior!r}")
        if self.process not in ("geometric", "negbin"):
            raise ConfigError(f"process must be geometric or negbin, got {self.process!r}")
        if not 0.0 < self.p < 1.0:
            raise ConfigError(f"p must lie in (0, 1), got {self.p}")
        if self.draws < 1 or self.sweeps < 0 or self.burn_in < 0 or self.thin < 1:
            raise ConfigError("need draws >= 1, sweeps >= 0, burn_in >= 0, thin >= 1")
        if self.update_p and self.seg_prior != "geometric":
            raise ConfigError("update_p needs the geometric segmentation prior")
        if not self.input:
            raise ConfigError("no input given")
        if self.events and not self.start_date:
            raise ConfigError("event-date input needs start_date")
        if self.bin_days < 1:
            raise ConfigError("bin_days must be >= 1")

    def grid(self) -> list[float]:
        try:
            values = [float(v) for v in self.sweep_grid.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad sweep_grid: {exc}") from None
        if not values:
            raise ConfigError("sweep mode needs sweep_grid")
        return values


PRESETS: dict[str, dict[str, str]] = {
    "coal": dict(input="coal_dates", kind="counts", events="true", start_date="1851-01-01",
                 end_date="1962-03-22", bin_days="7", model="poisson", rho="1",
                 lam=repr(200 / 7), seg_prior="even_order", k_prior="poisson", k_mean="3",
                 kmax="30", sweeps="500000", burn_in="10000", thin="50"),
    "streak": dict(input="streak", kind="binary", model="bernoulli", alpha="1", beta="1",
                   seg_prior="geometric", p="0.02", draws="100000", sweep_param="p",
                   sweep_grid="0.005,0.01,0.02,0.03,0.04,0.05,0.06,0.07,0.08,0.09,0.1"),
    "welllog": dict(input="welllog_synthetic", kind="real", model="gaussian", sigma="2330",
                    mu0="115000", nu="4.3", seg_prior="geometric", p="0.013", update_p="true",
                    update_gamma="true", sweeps="100000", burn_in="10000", thin="10",
                    sweep_param="p", sweep_grid="0.005,0.01,0.015,0.02,0.025,0.03"),
}

_ALIASES = {"lambda": "lam", "l": "window", "N": "draws"}
_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(key: str, raw: str) -> Any:
    typ = type(getattr(RunConfig, key))
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[_ALIASES.get(key, key)] = value
    return out


def build_config(raw: dict[str, str]) -> RunConfig:
    """Preset defaults, then explicit keys; unknown keys are an error."""
    values = dict(raw)
    preset = values.pop("preset", "")
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        values = {**PRESETS[preset], **values}
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    cfg.validate()
    return cfg


def config_text(cfg: RunConfig) -> str:
    return "".join(f"{k} = {_fmt_value(v)}\n" for k, v in asdict(cfg).items())


def _fmt_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


# -- data ------------------------------------------------------------------

def resolve_input(name: str) -> Path:
    path = Path(name)
    if path.is_file():
        return path
    bundled = resources.files("cpseg") / "data" / f"{name}.txt"
    if bundled.is_file():
        return Path(str(bundled))
    raise DataError(f"input {name!r} not found (not a file or bundled fixture)")


def _data_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if text and not text.startswith("#"):
                yield lineno, text


def read_values(path: Path) -> list[float]:
    """One number per line, or a single-column CSV with an optional header."""
    values = []
    first = True
    for lineno, text in _data_lines(path):
        cells = next(csv.reader([text]))
        if len(cells) != 1:
            raise DataError(f"line {lineno}: expected one column, got {len(cells)}")
        try:
            values.append(float(cells[0]))
        except ValueError:
            if first:
                first = False
                continue
            raise DataError(f"line {lineno}: not a number: {cells[0]!r}") from None
        first = False
    return values



def bin_event_dates(dates: list[dt.date], start: dt.date, end: dt.date | None,
                    bin_days: int) -> np.ndarray:
    """Counts of events per ``bin_days``-day bin; bin 0 starts on ``start`` and
    the last bin is the one containing ``end`` (default: the last event)."""
    end = end or max(dates)
    if end < start:
        raise DataError("end_date precedes start_date")
    n_bins = (end - start).days // bin_days + 1
    counts = np.zeros(n_bins, dtype=np.int64)
    for d in dates:
        if not start <= d <= end:
            raise DataError(f"event {d.isoformat()} outside [{start}, {end}]")
        counts[(d - start).days // bin_days] += 1
    return counts


def read_dates(path: Path) -> list[dt.date]:
    dates = []
    for lineno, text in _data_lines(path):
        try:
            dates.append(dt.date.fromisoformat(text))
        except ValueError:
            raise DataError(f"line {lineno}: not an ISO date: {text!r}") from None
    if not dates:
        raise DataError("no event dates")
    return dates


def _parse_date(text: str, key: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise ConfigError(f"{key} is not an ISO date: {text!r}") from None


def ingest(path: str | Path, kind: str | DataKind, *, events: bool = False,
           start_date: str = "", end_date: str = "", bin_days: int = 7) -> TimeSeries:
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file {str(path)!r} does not exist")
    if events:
        start = _parse_date(start_date, "start_date")
        end = _parse_date(end_date, "end_date") if end_date else None
        values = bin_event_dates(read_dates(path), start, end, bin_days)
    else:
        values = np.asarray(read_values(path))
    try:
        return TimeSeries(values, DataKind(kind))
    except ValidationError as exc:
        raise DataError(str(exc)) from None


def load_series(cfg: RunConfig) -> TimeSeries:
    return ingest(resolve_input(cfg.input), cfg.kind, events=cfg.events,
                  start_date=cfg.start_date, end_date=cfg.end_date, bin_days=cfg.bin_days)


# -- model assembly --------------------------------------------------------

def make_model(cfg: RunConfig) -> SegmentModel:
    try:
        if cfg.model == "poisson":
            return MODELS["poisson"](rho=cfg.rho, lam=cfg.lam)
        if cfg.model == "bernoulli":
            return MODELS["bernoulli"](alpha=cfg.alpha, beta=cfg.beta)
        return MODELS["gaussian"](sigma=cfg.sigma, mu0=cfg.mu0, nu=cfg.nu)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def make_hyperprior(cfg: RunConfig):
    if cfg.model == "gaussian":
        return GaussianHyperprior(cfg.sigma2_shape, cfg.sigma2_scale, cfg.nu2_shape,
                                  cfg.nu2_scale, cfg.mu0_mean, cfg.mu0_var)
    if cfg.model == "poisson":
        return PoissonRateHyperprior(cfg.lam_shape, cfg.lam_rate)
    return BetaShapeHyperprior(cfg.beta_shape_shape, cfg.beta_shape_rate, cfg.beta_shape_step)


def make_priors(cfg: RunConfig, n: int):
    kmax = n - 1 if cfg.kmax < 0 else min(cfg.kmax, n - 1)
    seg = GeometricPrior(cfg.p) if cfg.seg_prior == "geometric" else EvenOrderStatsPrior()
    kp = KPrior.uniform(kmax) if cfg.k_prior == "uniform" else KPrior.truncated_poisson(cfg.k_mean, kmax)
    return seg, kp


def make_process(cfg: RunConfig) -> PointProcess:
    if cfg.process == "geometric":
        return PointProcess.geometric(cfg.p)
    return PointProcess.negbin(cfg.process_r, cfg.p)


def sampler_config(cfg: RunConfig) -> SamplerConfig:
    try:
        return SamplerConfig(
            kmax=None if cfg.kmax < 0 else cfg.kmax, add_prob=cfg.add_prob, window=cfg.window,
            gibbs_prob=None if cfg.gibbs_prob < 0 else cfg.gibbs_prob, sweeps=cfg.sweeps,
            burn_in=cfg.burn_in, thin=cfg.thin, seed=cfg.seed, update_p=cfg.update_p,
            p_prior=(cfg.p_a, cfg.p_b), update_gamma=cfg.update_gamma,
            hyperprior=make_hyperprior(cfg) if cfg.update_gamma else None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# -- output ----------------------------------------------------------------

def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _g(x: float) -> str:
    return f"{float(x):.17g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_g(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_outputs(out: Path, summary: dict, pos_prob=None, trace=None, sweep=None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(_json_safe(summary), indent=2, allow_nan=False) + "\n")
    (out / "config.txt").write_text(config_text(RunConfig(**summary["config"])))
    if pos_prob is not None:
        write_csv(out / "pos_prob.csv", ["position", "probability"],
                  ((i + 1, float(v)) for i, v in enumerate(pos_prob)))
    if trace is not None:
        header, rows = trace
        write_csv(out / "trace.csv", header, rows)
    if sweep is not None:
        write_csv(out / "sweep.csv", ["value", "modal_k", "tie"], sweep)


# -- modes -----------------------------------------------------------------

def run_sample(cfg: RunConfig, stats, out: Path) -> None:
    model = make_model(cfg)
    seg, kp = make_priors(cfg, stats.n)
    chain = ChangepointSampler(stats, model, seg, kp, sampler_config(cfg)).run()
    summ = summarize(chain)
    names = list(chain.hyper)
    rows = (
        [int(chain.sweep[i]), int(chain.k[i]), float(chain.p[i])] + [float(chain.hyper[h][i]) for h in names]
        for i in range(len(chain))
    )
    summary = {
        "mode": "sample", "n": stats.n, "seed": cfg.seed,
        "k_dist": summ.k_dist, "mean_k": summ.mean_k, "hyper_means": summ.hyper_means,
        "acceptance": chain.acceptance, "iact": summ.iact, "iact_capped": summ.iact_capped,
        "acf": summ.acf, "unique_visited": chain.unique_visited, "config": asdict(cfg),
    }
    write_outputs(out, summary, summ.pos_prob, (["sweep", "k", "p", *names], rows))


def run_recurse(cfg: RunConfig, stats, out: Path) -> None:
    model = make_model(cfg)
    tol = None if cfg.truncate_tol <= 0 else cfg.truncate_tol
    table = compute_recursions(stats, model, make_process(cfg), truncate_tol=tol)
    draws = sample_changepoints(table, cfg.draws, np.random.default_rng(cfg.seed))
    k = draws.k
    names = list(model.hyper_names)
    hv = model.hyper()
    rows = ([i + 1, int(k[i]), cfg.p] + [hv[h] for h in names] for i in range(len(draws)))
    dist = draws.k_dist()
    summary = {
        "mode": "recurse", "n": stats.n, "seed": cfg.seed, "draws": cfg.draws,
        "log_evidence": table.log_evidence, "k_dist": dist,
        "mean_k": float(np.arange(dist.size) @ dist), "modal_k": modal_k(dist)[0],
        "hyper_means": {**hv, "p": cfg.p}, "config": asdict(cfg),
    }
    write_outputs(out, summary, draws.pos_prob(), (["draw", "k", "p", *names], rows))


def run_sweep(cfg: RunConfig, stats, out: Path) -> None:
    model = make_model(cfg)
    name = cfg.sweep_param
    if name != "p" and name not in model.hyper_names and name != "lam":
        raise ConfigError(f"cannot sweep {name!r} for model {cfg.model!r}")
    grid = cfg.grid()
    if name == "p" and not all(0 < v < 1 for v in grid):
        raise ConfigError("p grid values must lie in (0, 1)")
    try:
        res = sensitivity_sweep(stats, model, make_process(cfg), name, grid, cfg.draws,
                                np.random.default_rng(cfg.seed))
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    summary = {
        "mode": "sweep", "n": stats.n, "seed": cfg.seed, "param": name,
        "grid": res.grid, "modal_k": res.modal_k, "ties": res.ties.tolist(),
        "k_dists": res.k_dists, "config": asdict(cfg),
    }
    rows = ([float(v), int(m), int(t)] for v, m, t in zip(res.grid, res.modal_k, res.ties))
    write_outputs(out, summary, sweep=rows)


def run_enumerate(cfg: RunConfig, stats, out: Path) -> None:
    model = make_model(cfg)
    seg, kp = make_priors(cfg, stats.n)
    try:
        ex = enumerate_exact_posterior(stats, model, seg, kp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    summary = {
        "mode": "enumerate", "n": stats.n, "seed": cfg.seed, "k_dist": ex.k_dist,
        "mean_k": float(np.arange(ex.k_dist.size) @ ex.k_dist), "log_evidence": ex.log_evidence,
        "n_segmentations": len(ex.segmentations), "hyper_means": model.hyper(), "config": asdict(cfg),
    }
    write_outputs(out, summary, ex.pos_prob)


RUNNERS = {"sample": run_sample, "recurse": run_recurse, "sweep": run_sweep, "enumerate": run_enumerate}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cpseg", description="Bayesian multiple-changepoint analysis.")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", type=Path, help="flat key = value config file")
    ap.add_argument("--preset", choices=sorted(PRESETS))
    ap.add_argument("--input", help="data file or bundled fixture name")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", type=Path, default=Path("cpseg-out"))
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one config key (repeatable)")
    return ap


def load_config(args: argparse.Namespace) -> RunConfig:
    raw: dict[str, str] = {}
    if args.config is not None:
        try:
            raw.update(parse_config_text(args.config.read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    if args.preset:
        raw["preset"] = args.preset
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        raw[_ALIASES.get(key.strip(), key.strip())] = value.strip()
    if args.input is not None:
        raw["input"] = args.input
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    return build_config(raw)


def _fail(kind: str, exc: BaseException, code: int) -> int:
    print(json.dumps({"error": kind, "message": str(exc), "exit_code": code}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        series = load_series(cfg)
        RUNNERS[args.mode](cfg, build_stats(series), args.out)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except (DataError, ValidationError) as exc:
        return _fail("data", exc, EXIT_DATA)
    except (FloatingPointError, OverflowError, ZeroDivisionError) as exc:
        return _fail("numerical", exc, EXIT_NUMERIC)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
