"""Ruin probabilities for the renewal risk model.

Claims ``A_n`` arrive after interarrival times ``T_n`` and premium comes in
at rate ``c``.  The reserve started at ``x`` is ruined exactly when the net
loss walk ``S_n = sum (A_i - c T_i)`` exceeds ``x``, so ``psi(x) = P{M > x}``
and the expansions of :mod:`walktail.expansion` apply to the step tail

    Fbar(x) = int Lbar(x + c t) dK(t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import beta as beta_fn

from .expansion import ExpansionResult, expand
from .ladder import MomentSet, simulate_maximum
from .steps import (
    CLAIM_BURR, CLAIM_PARETO, INTER_DET, INTER_EXP, KIND_NET_LOSS, StepDistribution, _net_loss_params,
)
from .tails import BurrTail, ParetoTail, TailModel, _split_spec, parse_tail_spec

QUAD_EPSREL = 1e-12
QUAD_LIMIT = 500


@dataclass(frozen=True)
class Interarrival:
    kind: str  # "exp" or "det"
    mean: float

    def __post_init__(self):
        if self.kind not in ("exp", "det"):
            raise ValueError(f"unknown interarrival family {self.kind!r}")
        if not self.mean > 0:
            raise ValueError("interarrival mean must be positive")

    @property
    def rate(self) -> float:
        return 1.0 / self.mean


def parse_interarrival_spec(spec: str) -> Interarrival:
    """``exp:rate=1``, ``exp:mean=2`` or ``det:t=1``."""
    family, params = _split_spec(spec)
    if family == "exp":
        if set(params) == {"rate"}:
            return Interarrival("exp", 1.0 / params["rate"])
        if set(params) == {"mean"}:
            return Interarrival("exp", params["mean"])
    elif family == "det" and set(params) == {"t"}:
        return Interarrival("det", params["t"])
    raise ValueError(f"bad interarrival spec {spec!r}")


def claim_mean(claims: TailModel) -> float:
    if isinstance(claims, ParetoTail):
        if claims.loc != 0:
            raise ValueError("claims must start at their scale (loc=0)")
        return claims.scale * claims.alpha / (claims.alpha - 1.0)
    if isinstance(claims, BurrTail):
        if claims.loc != 0:
            raise ValueError("claims must start at 0 (loc=0)")
        c, k = claims.c, claims.k
        return claims.scale * k * beta_fn(k - 1.0 / c, 1.0 + 1.0 / c)
    raise TypeError(f"unsupported claim family {type(claims).__name__}")


@dataclass(frozen=True)
class RuinScenario:
    claims: TailModel
    interarrival: Interarrival
    premium_rate: float

    def __post_init__(self):
        if not self.premium_rate > 0:
            raise ValueError("premium rate must be positive")
        if not self.mean < 0:
            raise ValueError(f"net loss mean {self.mean} must be negative (premium too low)")

    @property
    def mean(self) -> float:
        return claim_mean(self.claims) - self.premium_rate * self.interarrival.mean

    @property
    def alpha(self) -> float:
        return self.claims.alpha


@dataclass(frozen=True, eq=False)
class ScenarioTail(TailModel):
    """``Fbar(x) = int Lbar(x + c t) dK(t)`` with derivatives and integrated tail under the integral."""

    claims: TailModel
    interarrival: Interarrival
    premium_rate: float
    name: str = "net-loss"
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def alpha(self):
        return self.claims.alpha

    @property
    def x_min(self):
        return self.claims.x_min

    @property
    def k_max(self):
        return self.claims.k_max

    def _mix(self, g, x: float) -> float:
        """``int g(x + c t) dK(t)``."""
        if self.interarrival.kind == "det":
            return float(g(x + self.premium_rate * self.interarrival.mean))
        # exponential: (1/s) int_0^inf g(x + u) exp(-u / s) du with s = c E T
        s = self.premium_rate * self.interarrival.mean
        val, _ = integrate.quad(lambda u: float(g(x + u)) * math.exp(-u / s), 0.0, np.inf,
                                epsabs=0.0, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
        return val / s

    def _scalar(self, fn, x):
        if np.ndim(x) == 0:
            return fn(float(x))
        return np.array([fn(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))

    def _tail(self, x):
        return self._scalar(lambda v: self._mix(self.claims.tail, v), x)

    def _dtail(self, k, x):
        return self._scalar(lambda v: self._mix(lambda y: self.claims.dtail(k, y), v), x)

    def _itail(self, x):
        return self._scalar(lambda v: self._mix(self.claims.itail, v), x)

    def full_tail(self, x: float) -> float:
        """``P{X > x}`` for any real ``x`` (claims below their support count as certain exceedance)."""
        x0 = self.claims.x_min
        if x >= x0:
            return float(self._tail(x))
        c = self.premium_rate
        if self.interarrival.kind == "det":
            y = x + c * self.interarrival.mean
            return 1.0 if y < x0 else float(self.claims.tail(y))
        s = c * self.interarrival.mean
        d = x0 - x  # u < d means the claim threshold is not yet reached
        val, _ = integrate.quad(lambda u: float(self.claims.tail(x + u)) * math.exp(-u / s), d, np.inf,
                                epsabs=0.0, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
        return (1.0 - math.exp(-d / s)) + val / s


def step_tail_from_scenario(sc: RuinScenario) -> ScenarioTail:
    return ScenarioTail(sc.claims, sc.interarrival, sc.premium_rate)


def scenario_step(sc: RuinScenario) -> StepDistribution:
    """The net loss step ``X = A - c T`` as a samplable :class:`StepDistribution`."""
    cl = sc.claims
    if isinstance(cl, ParetoTail):
        claim_kind, claim_params = CLAIM_PARETO, [cl.alpha, cl.scale]
    elif isinstance(cl, BurrTail):
        claim_kind, claim_params = CLAIM_BURR, [cl.c, cl.k, cl.scale]
    else:
        raise TypeError(f"unsupported claim family {type(cl).__name__}")
    ia = sc.interarrival
    inter_kind, inter_param = (INTER_EXP, ia.rate) if ia.kind == "exp" else (INTER_DET, ia.mean)
    params = _net_loss_params(claim_kind, claim_params, inter_kind, inter_param, sc.premium_rate, 0.0)
    tail = step_tail_from_scenario(sc)
    lower = -math.inf if ia.kind == "exp" else cl.x_min - sc.premium_rate * ia.mean
    desc = f"ruin:claims={cl.name}(alpha={cl.alpha:g}),interarrival={ia.kind}(mean={ia.mean:g}),c={sc.premium_rate:g}"
    return StepDistribution(KIND_NET_LOSS, params, sc.mean, tail, math.inf, desc, lower_bound=lower,
                            full_sf=tail.full_tail)


def make_scenario(claims: str, interarrival: str, premium: float) -> RuinScenario:
    return RuinScenario(parse_tail_spec(claims), parse_interarrival_spec(interarrival), float(premium))


@dataclass(frozen=True)
class PsiTable:
    x: np.ndarray
    value: np.ndarray
    terms: np.ndarray
    result: ExpansionResult


def psi_expansion(sc: RuinScenario, m: int, moments: MomentSet, x_grid) -> PsiTable:
    """Order-``m`` expansion of the ruin probability on ``x_grid``."""
    res = expand(moments, m, alpha=sc.alpha)
    model = step_tail_from_scenario(sc)
    xs = np.asarray(x_grid, float)
    terms = res.terms(model, xs)
    return PsiTable(xs, terms.sum(axis=1), terms, res)


def simulate_ruin(sc: RuinScenario, x_grid, reps: int, seed: int = 0, barrier: float | None = None, **kw):
    """Monte Carlo ``psi(x)``; paths stop once the walk falls below ``-barrier``."""
    return simulate_maximum(scenario_step(sc), x_grid, reps, seed, barrier, **kw)
