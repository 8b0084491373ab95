"""Ruin probability: order-m expansion against simulation over an x grid.

Pareto claims, exponential interarrivals, premium chosen for a given drift.
``--claim-scales`` repeats the comparison for several claim scales (premium
adjusted to keep the drift), which shows where on the x axis the expansion
becomes accurate.

    python scripts/ruin_comparison.py --reps 1000000 --claim-scales 1
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np

from walktail.ladder import estimate_moments
from walktail.ruin import make_scenario, psi_expansion, scenario_step, simulate_ruin


@dataclass
class Config:
    alpha: float = 3.0
    drift: float = -1.0
    order: int = 2
    x_min: float = 2.0
    x_max: float = 60.0
    n_x: int = 12
    reps: int = 10**6
    moment_reps: int = 10**6
    barrier: float = 250.0
    seed: int = 1
    claim_scales: str = "1"


def compare(cfg: Config, scale: float) -> None:
    mean_claim = scale * cfg.alpha / (cfg.alpha - 1)
    premium = mean_claim - cfg.drift
    sc = make_scenario(f"pareto:alpha={cfg.alpha},scale={scale}", "exp:rate=1", premium)
    ms = estimate_moments(scenario_step(sc), cfg.order, cfg.moment_reps, cfg.seed, barrier=cfg.barrier)
    xs = np.geomspace(cfg.x_min, cfg.x_max, cfg.n_x)
    mc = simulate_ruin(sc, xs, cfg.reps, cfg.seed + 1, barrier=cfg.barrier)
    tables = {m: psi_expansion(sc, m, ms.restrict(m), xs) for m in range(1, cfg.order + 1)}
    print(f"# claim scale {scale}, premium {premium:.4g}, p = {ms.p:.5f} +- {ms.stderr['p']:.1e}")
    head = "".join(f" {'m=' + str(m):>11}" for m in tables)
    print(f"{'x':>8} {'psi MC':>11} {'se':>9}{head}  ratio(m={cfg.order})")
    for i, x in enumerate(xs):
        vals = "".join(f" {tables[m].value[i]:11.4e}" for m in tables)
        ratio = tables[cfg.order].value[i] / mc.tail[i] if mc.tail[i] > 0 else float("nan")
        print(f"{x:8.2f} {mc.tail[i]:11.4e} {mc.tail_se[i]:9.1e}{vals}  {ratio:.3f}")


def main(cfg: Config) -> None:
    for s in cfg.claim_scales.split(","):
        compare(cfg, float(s))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, default in vars(Config()).items():
        ap.add_argument("--" + name.replace("_", "-"), type=type(default), default=default)
    main(Config(**vars(ap.parse_args())))
