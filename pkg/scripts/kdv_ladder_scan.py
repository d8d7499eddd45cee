"""Scan KdV permutability ladders for poles on a fixed grid.

Draws random levels (xi_i, k_i) with b_1 = k_1^2 - xi_1^2 > 0 and b_i b_{i+1} < 0
and counts how many ladders reach the final level without a pole on the grid.
The alternating sign pattern alone does not guarantee smoothness; the
two-level rows are split by the ordering of k_1 and k_2.
"""
import argparse
from dataclasses import dataclass

import numpy as np

from loopdress.fd import Grid
from loopdress.kdv import kdv_ladder


@dataclass
class ScanConfig:
    samples: int = 100
    seed: int = 7
    levels: tuple = (2, 3, 4, 5)
    x: tuple = (-15.0, 15.0)
    t: tuple = (-1.0, 1.0)
    hx: float = 0.02
    ht: float = 0.1


def draw_level(rng, positive):
    while True:
        xi, k = rng.uniform(-1.5, 1.5), rng.uniform(0.2, 1.5)
        if (k * k - xi * xi > 0) == positive and abs(k * k - xi * xi) > 0.05:
            return xi, k


def draw_ladder(rng, n):
    while True:
        lv = [draw_level(rng, i % 2 == 0) for i in range(n)]
        ks = sorted(k for _, k in lv)
        if min(b - a for a, b in zip(ks, ks[1:])) > 1e-3:
            return lv


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--samples", type=int, default=ScanConfig.samples)
    p.add_argument("--seed", type=int, default=ScanConfig.seed)
    p.add_argument("--levels", type=int, nargs="+")
    a = p.parse_args()
    cfg = ScanConfig(samples=a.samples, seed=a.seed, **({"levels": tuple(a.levels)} if a.levels else {}))
    rng = np.random.default_rng(cfg.seed)
    X, T = Grid.uniform(*cfg.x, cfg.hx, *cfg.t, cfg.ht).mesh()
    for n in cfg.levels:
        counts = {"increasing k": [0, 0], "other": [0, 0]}  # [singular, total]
        for _ in range(cfg.samples):
            lv = draw_ladder(rng, n)
            xs, ks = [v[0] for v in lv], [v[1] for v in lv]
            L = kdv_ladder(xs, ks, X, T)
            c = counts["increasing k" if all(np.diff(ks) > 0) else "other"]
            c[1] += 1
            c[0] += int(L.mask.any() or not np.isfinite(L.q).all())
        bad = sum(c[0] for c in counts.values())
        split = ", ".join(f"{key}: {s}/{t}" for key, (s, t) in counts.items() if t)
        print(f"{n} levels: {bad} of {cfg.samples} alternating ladders singular on the grid ({split})")


if __name__ == "__main__":
    main()
