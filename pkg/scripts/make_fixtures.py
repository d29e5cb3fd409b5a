"""Regenerate the synthetic fixture series bundled in ``cpseg/data``.

streak.txt: 0/1 outcomes whose success rate drifts mildly between blocks,
a weak-signal stand-in for hit/out sequences.
welllog_synthetic.txt: 4050 piecewise-constant Gaussian levels around 1.15e5
with jumps of 1.5 to 8 noise s.d. and AR(1) noise, a cleaned stand-in for a
well-log trace.
"""
from __future__ import annotations

import argparse
import math
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "cpseg" / "data"


def streak(rng: np.random.Generator) -> np.ndarray:
    rates = [0.26, 0.34, 0.22, 0.31, 0.27, 0.36, 0.24]
    lengths = [70, 45, 60, 55, 80, 40, 65]
    return np.concatenate([rng.random(m) < r for r, m in zip(rates, lengths)]).astype(int)


def welllog(rng: np.random.Generator, n: int = 4050, sigma: float = 2330.0,
            phi: float = 0.4) -> np.ndarray:
    cuts = [0]
    while True:
        nxt = cuts[-1] + 25 + int(rng.geometric(0.02))
        if nxt >= n - 25:
            break
        cuts.append(nxt)
    cuts.append(n)
    levels = [115000.0]
    for _ in range(len(cuts) - 2):
        step = rng.choice([-1, 1]) * rng.uniform(1.5 * sigma, 8 * sigma)
        levels.append(levels[-1] + step)
    mean = np.concatenate([np.full(b - a, lv) for a, b, lv in zip(cuts[:-1], cuts[1:], levels)])
    # mildly autocorrelated noise: real logs are not white within a layer
    z = rng.standard_normal(n)
    e = np.empty(n)
    e[0] = z[0]
    scale = math.sqrt(1.0 - phi * phi)
    for i in range(1, n):
        e[i] = phi * e[i - 1] + scale * z[i]
    return mean + sigma * e


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=20070101)
    ap.add_argument("--out", type=Path, default=DATA)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    y = streak(rng)
    (args.out / "streak.txt").write_text(
        f"# synthetic binary series, seed {args.seed}\n" + "".join(f"{v}\n" for v in y))
    w = welllog(rng)
    (args.out / "welllog_synthetic.txt").write_text(
        f"# synthetic piecewise-constant Gaussian series, seed {args.seed}\n"
        + "".join(f"{v:.17g}\n" for v in w))


if __name__ == "__main__":
    main()
