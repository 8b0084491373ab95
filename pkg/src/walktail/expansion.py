"""Tail expansions of the maximum and of the ascending ladder height.

The maximum ``M`` of the walk has

    Wbar = (1-p) (Id - L_{F+,m-1})^-2 (S L_{F-,m})^-1 (D^-1 Fbar) + o(x^{2-m} Fbar)

where ``L_{G,m}`` is the Laplace character, ``S`` the backward signed shift
and ``D^-1 Fbar = -int_x^inf Fbar``.  Dropping the ``(Id - L_{F+})^-2``
factor and ``(1-p)`` gives the matching expansion of ``Fbar+``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dring import DPoly, apply_terms, laplace_character, shift_S
from .ladder import MomentSet
from .scalars import Sym, mu
from .tails import TailModel


class OrderError(ValueError):
    """Requested expansion order violates ``m < min(alpha, kappa, omega)``."""


def check_order(m: int, alpha: float = math.inf, kappa: float = math.inf, omega: float = math.inf) -> None:
    if m < 1:
        raise OrderError(f"order must be >= 1, got {m}")
    bound = min(alpha, kappa, omega)
    if m >= bound:
        raise OrderError(f"order {m} needs m < min(alpha, kappa, omega) = {bound:g}")
    if bound - m < 0.5:
        warnings.warn(f"order {m} is within 0.5 of the admissible bound {bound:g}; expect slow convergence",
                      stacklevel=2)


def _unit_like(c, order):
    return DPoly.unit(order, c * 0 + 1)


def _one_minus_p(moments: MomentSet):
    return 1 - moments.p


def descending_factor(moments: MomentSet, m: int) -> DPoly:
    """``S L_{F-,m}``, of order ``m - 1``."""
    return shift_S(laplace_character(moments.minus_sequence(m), m))


def build_operator(moments: MomentSet, m: int | None = None) -> DPoly:
    """Order ``m - 1`` operator acting on ``D^-1 Fbar`` for the tail of the maximum."""
    m = moments.m if m is None else m
    if m < 1:
        raise OrderError("order must be >= 1")
    if m > moments.m:
        raise ValueError(f"moment set has order {moments.m} < {m}")
    q = _one_minus_p(moments)
    lp = laplace_character(moments.plus_sequence(m - 1), m - 1)
    ascent = (_unit_like(q, m - 1) - lp).inv()
    return ascent * ascent * descending_factor(moments, m).inv() * q


def fplus_operator(moments: MomentSet, m: int | None = None) -> DPoly:
    """Order ``m - 1`` operator acting on ``D^-1 Fbar`` for ``Fbar+``."""
    m = moments.m if m is None else m
    if m < 1:
        raise OrderError("order must be >= 1")
    return descending_factor(moments, m).inv()


def penultimate_operator(moments: MomentSet, m: int) -> DPoly:
    """``(1-p)(Id - L_{F+,m})^-2`` of order ``m``; coefficient ``k`` multiplies ``D^k Fbar+``."""
    if m < 0:
        raise OrderError("order must be >= 0")
    q = _one_minus_p(moments)
    lp = laplace_character(moments.plus_sequence(m), m)
    ascent = (_unit_like(q, m) - lp).inv()
    return ascent * ascent * q


def apply_penultimate(op: DPoly, fplus_derivs, x) -> float:
    """``sum_k c_k D^k Fbar+(x)`` with ``fplus_derivs[k]`` the k-th derivative of ``Fbar+``."""
    if len(fplus_derivs) < op.order + 1:
        raise ValueError(f"operator of order {op.order} needs {op.order + 1} derivatives of Fbar+")
    return sum(float(c) * g(x) for c, g in zip(op.coeffs, fplus_derivs))


def substitute_mean(a: DPoly) -> DPoly:
    """Rewrite ``mu[Fm,1]`` as ``mu[F,1] / (1-p)`` in a symbolic operator."""
    from .scalars import Q

    value = mu("F", 1) * Q.inverse()
    return a.map(lambda c: c.subs("mu[Fm,1]", value) if isinstance(c, Sym) else c)


def display_coefficients() -> tuple:
    """The three leading coefficients of the maximum's expansion written in terms of ``mu[F,1]``."""
    from .scalars import Q

    m_ = mu("F", 1)
    m1, m2, m3 = mu("Fm", 1), mu("Fm", 2), mu("Fm", 3)
    p1, p2 = mu("Fp", 1), mu("Fp", 2)
    c0 = m_.inverse()
    c1 = (Q * m2 - 4 * p1 * m1) * (2 * m_ * m_).inverse()
    c2 = (3 * Q * Q * m2 * m2 + 12 * m_ * (m1 * p2 - p1 * m2) + 36 * m1 * m1 * p1 * p1 - 2 * Q * m_ * m3) * (
        12 * m_ * m_ * m_
    ).inverse()
    return tuple(c.subs("mu[Fm,1]", m_ * Q.inverse()) for c in (c0, c1, c2))


@dataclass(frozen=True)
class ExpansionResult:
    m: int
    operator: DPoly
    target: str = "maximum"  # or "fplus"

    def terms(self, model: TailModel, x) -> np.ndarray:
        """The ``m`` addends ``c_k D^{k-1} Fbar(x)``; one row per x."""
        xs = np.atleast_1d(np.asarray(x, float))
        return np.array([apply_terms(self.operator, model, float(v)) for v in xs])

    def value(self, model: TailModel, x) -> np.ndarray:
        return self.terms(model, x).sum(axis=1)

    def residual_scale(self, model: TailModel, x) -> np.ndarray:
        """``x^{2-m} Fbar(x)``; for ``m = 1`` the magnitude of the leading term instead."""
        xs = np.atleast_1d(np.asarray(x, float))
        if self.m == 1:
            return np.abs(self.terms(model, xs)[:, 0])
        return xs ** (2.0 - self.m) * np.asarray(model.tail(xs), float)


def expand(moments: MomentSet, m: int | None = None, alpha: float = math.inf, kappa: float = math.inf,
           omega: float = math.inf, target: str = "maximum") -> ExpansionResult:
    """Checked construction of an :class:`ExpansionResult`."""
    m = moments.m if m is None else m
    check_order(m, alpha, kappa, omega)
    build = {"maximum": build_operator, "fplus": fplus_operator}[target]
    return ExpansionResult(m, build(moments, m), target)


def evaluate(result: ExpansionResult, model: TailModel, x):
    """``(values, terms)`` at the points ``x``."""
    t = result.terms(model, x)
    return t.sum(axis=1), t


@dataclass(frozen=True)
class ResidualTable:
    x: np.ndarray
    value: np.ndarray
    reference: np.ndarray
    reference_err: np.ndarray
    residual: np.ndarray
    scaled: np.ndarray

    @property
    def upper_half(self) -> slice:
        return slice(len(self.x) // 2, None)

    def passes(self) -> bool:
        """Scaled residual nonincreasing along the upper half of the grid."""
        s = self.scaled[self.upper_half]
        return bool(np.all(np.diff(s) <= 0))


def residual_diagnostic(result: ExpansionResult, model: TailModel, reference, x_grid, reference_err=None,
                        scale=None) -> ResidualTable:
    """Scaled residuals ``|reference - value| / scale`` on ``x_grid``.

    ``reference`` is an array of oracle or Monte Carlo values at the grid
    points (or a callable); ``scale`` defaults to the result's residual scale.
    """
    xs = np.asarray(x_grid, float)
    ref = np.asarray(reference(xs) if callable(reference) else reference, float)
    err = np.zeros_like(ref) if reference_err is None else np.asarray(reference_err, float)
    val = result.value(model, xs)
    res = np.abs(ref - val)
    sc = result.residual_scale(model, xs) if scale is None else np.asarray(scale(xs) if callable(scale) else scale)
    return ResidualTable(xs, val, ref, err, res, res / sc)


def value_stderr(moments: MomentSet, m: int, model: TailModel, x, target: str = "maximum") -> np.ndarray:
    """First-order propagation of the moment standard errors into the expansion value."""
    se = moments.stderr or {}
    xs = np.atleast_1d(np.asarray(x, float))
    build = {"maximum": build_operator, "fplus": fplus_operator}[target]
    base = ExpansionResult(m, build(moments, m), target).value(model, xs)
    total = np.zeros_like(base)

    def bumped(p=None, minus=None, plus=None):
        mm = MomentSet(moments.m, moments.p if p is None else p, moments.mu_F1,
                       minus if minus is not None else moments.mu_minus,
                       plus if plus is not None else moments.mu_plus, {}, moments.source)
        return ExpansionResult(m, build(mm, m), target).value(model, xs)

    sp = float(se.get("p", 0.0))
    if sp > 0:
        plus = list(moments.mu_plus)
        plus[0] = moments.p + sp
        total += (bumped(p=moments.p + sp, plus=plus) - base) ** 2
    for k, s in enumerate(se.get("mu_minus", [])[:m]):
        if s > 0:
            minus = list(moments.mu_minus)
            minus[k] += s
            total += (bumped(minus=minus) - base) ** 2
    for k, s in enumerate(se.get("mu_plus", [])[1:m], start=1):
        if s > 0:
            plus = list(moments.mu_plus)
            plus[k] += s
            total += (bumped(plus=plus) - base) ** 2
    return np.sqrt(total)
