"""How the censoring barrier biases ladder estimates.

For each barrier B the ascent probability p and the ascent tail at a few x are
estimated; the censoring indicator bounds the mass lost below -B.  Tail
estimates at large x need B well above x.

    python scripts/censoring_sensitivity.py --barriers 25,50,100,200,400
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np

from walktail.ladder import ascend
from walktail.steps import parse_step_spec


@dataclass
class Config:
    step: str = "paretoshift:alpha=3,scale=1,shift=3"
    barriers: str = "25,50,100,200,400"
    xs: str = "10,40,80"
    reps: int = 10**6
    seed: int = 1


def main(cfg: Config) -> None:
    step = parse_step_spec(cfg.step)
    xs = np.array([float(v) for v in cfg.xs.split(",")])
    print(f"# {step.description}, {cfg.reps} reps")
    print(f"{'B':>6} {'p':>10} {'se':>8} {'censoring':>10}" + "".join(f" {'x=' + format(x, 'g'):>12}" for x in xs))
    for b in (float(v) for v in cfg.barriers.split(",")):
        r = ascend(step, 0, cfg.reps, cfg.seed, barrier=b, xs=xs)
        tails = "".join(f" {t:12.4e}" for t in r.tail)
        print(f"{b:6g} {r.moments[0]:10.6f} {r.moments_se[0]:8.1e} {r.censoring:10.1e}{tails}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, default in vars(Config()).items():
        ap.add_argument("--" + name.replace("_", "-"), type=type(default), default=default)
    main(Config(**vars(ap.parse_args())))
