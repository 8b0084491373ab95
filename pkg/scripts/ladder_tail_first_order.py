"""First-order tail of the ascending ladder height against simulation.

Compares int_x^inf Fbar / |E S_{tau-}| with the simulated P{S_tau > x, tau < inf}
along an x grid and prints the ratio with its relative standard error.

    python scripts/ladder_tail_first_order.py --reps 10000000
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np

from walktail.expansion import expand
from walktail.ladder import MomentSet, ascend, descending_moments
from walktail.steps import parse_step_spec


@dataclass
class Config:
    step: str = "paretoshift:alpha=3,scale=1,shift=3"
    reps: int = 10**6
    moment_reps: int = 10**6
    barrier: float = 400.0
    x_min: float = 5.0
    x_max: float = 400.0
    n_x: int = 20
    seed: int = 1


def main(cfg: Config) -> None:
    step = parse_step_spec(cfg.step)
    xs = np.geomspace(cfg.x_min, cfg.x_max, cfg.n_x)
    asc = ascend(step, 0, cfg.reps, cfg.seed, barrier=cfg.barrier, xs=xs)
    m1, _ = descending_moments(step, 1, cfg.moment_reps, cfg.seed + 1)
    p = float(asc.moments[0])
    approx = expand(MomentSet(1, p, step.mean, [float(m1[0])], [p]), 1, alpha=step.alpha,
                    target="fplus").value(step.upper_tail, xs)
    print(f"# {step.description}: p = {p:.5f}, E S_tau- = {m1[0]:.5f}, censoring {asc.censoring:.1e}")
    print(f"{'x':>8} {'MC':>11} {'rel se':>7} {'first order':>12} {'ratio':>6}")
    for x, t, s, a in zip(xs, asc.tail, asc.tail_se, approx):
        rel = s / t if t > 0 else float("inf")
        print(f"{x:8.2f} {t:11.4e} {rel:7.3f} {a:12.4e} {a / t if t > 0 else float('nan'):6.3f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, default in vars(Config()).items():
        ap.add_argument("--" + name.replace("_", "-"), type=type(default), default=default)
    main(Config(**vars(ap.parse_args())))
