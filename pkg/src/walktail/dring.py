"""Truncated operator ring R_m[D] = R[D] / (D^{m+1}).

Elements are stored as coefficient tuples ``c_0..c_m``.  The scalar type is
whatever the coefficients are: ``Fraction``, ``float`` or :class:`Sym`; the
only requirements are ``+``, ``*``, unary ``-`` and ``1 / c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .scalars import NotInvertible, Sym

REL_TOL = 1e-12
ABS_FLOOR = 1e-300


class OrderMismatch(ValueError):
    pass


def _is_zero(c) -> bool:
    return c == 0


def _zero_like(c):
    return c * 0


def _one_like(c):
    return c * 0 + 1


@dataclass(frozen=True)
class DPoly:
    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        if not self.coeffs:
            raise ValueError("DPoly needs at least one coefficient")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def unit(cls, order: int, one=1) -> "DPoly":
        return cls((one,) + (one * 0,) * order)

    @classmethod
    def zero(cls, order: int, zero=0) -> "DPoly":
        return cls((zero,) * (order + 1))

    @classmethod
    def monomial(cls, k: int, order: int, one=1) -> "DPoly":
        """``D^k`` in R_order[D] (zero when ``k > order``)."""
        z = one * 0
        return cls(tuple(one if j == k else z for j in range(order + 1)))

    def _check(self, other: "DPoly"):
        if not isinstance(other, DPoly):
            raise TypeError(f"expected DPoly, got {type(other).__name__}")
        if other.order != self.order:
            raise OrderMismatch(f"orders differ: {self.order} vs {other.order}")

    def __add__(self, other):
        if not isinstance(other, DPoly):
            return self + DPoly.unit(self.order, _one_like(self.coeffs[0])) * other
        self._check(other)
        return DPoly(a + b for a, b in zip(self.coeffs, other.coeffs))

    def __radd__(self, other):
        return self + other

    def __neg__(self):
        return DPoly(-c for c in self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, DPoly):
            return DPoly(c * other for c in self.coeffs)
        self._check(other)
        a, b = self.coeffs, other.coeffs
        out = []
        for k in range(len(a)):
            s = a[0] * b[k]
            for j in range(1, k + 1):
                s = s + a[j] * b[k - j]
            out.append(s)
        return DPoly(out)

    def __rmul__(self, other):
        return DPoly(other * c for c in self.coeffs)

    def __pow__(self, k: int):
        if k < 0:
            return self.inv() ** (-k)
        out = DPoly.unit(self.order, _one_like(self.coeffs[0]))
        for _ in range(k):
            out = out * self
        return out

    def inv(self) -> "DPoly":
        c = self.coeffs
        if _is_zero(c[0]):
            raise NotInvertible("constant term is zero")
        try:
            r = Fraction(1, c[0]) if isinstance(c[0], int) else 1 / c[0]
        except (ZeroDivisionError, NotInvertible) as exc:
            raise NotInvertible(str(exc)) from exc
        b = [r]
        for k in range(1, len(c)):
            s = c[1] * b[k - 1]
            for j in range(2, k + 1):
                s = s + c[j] * b[k - j]
            b.append(-(r * s))
        return DPoly(b)

    def truncate(self, order: int) -> "DPoly":
        if order > self.order:
            raise OrderMismatch("truncate cannot raise the order")
        return DPoly(self.coeffs[: order + 1])

    def close_to(self, other: "DPoly", rtol: float = REL_TOL, atol: float = ABS_FLOOR) -> bool:
        self._check(other)
        return all(
            abs(a - b) <= max(rtol * max(abs(a), abs(b)), atol)
            for a, b in zip(self.coeffs, other.coeffs)
        )

    def map(self, fn) -> "DPoly":
        return DPoly(fn(c) for c in self.coeffs)

    def to_text(self) -> str:
        """Canonical text: ``coeff * sym^e * ... * D^k`` sorted by k, then lexicographically."""
        pieces = []
        for k, c in enumerate(self.coeffs):
            dk = "" if k == 0 else (" * D" if k == 1 else f" * D^{k}")
            if isinstance(c, Sym):
                for mono, coef in c.sorted_terms():
                    body = str(Sym({mono: coef}))
                    pieces.append(body + dk)
            elif not _is_zero(c):
                pieces.append(f"{c!r}{dk}" if isinstance(c, float) else f"{c}{dk}")
        if not pieces:
            return "0"
        return " + ".join(pieces).replace("+ -", "- ")

    def __str__(self):
        return self.to_text()


def truncate_to_min(a: DPoly, b: DPoly) -> tuple[DPoly, DPoly]:
    m = min(a.order, b.order)
    return a.truncate(m), b.truncate(m)


def ring_add(a: DPoly, b: DPoly) -> DPoly:
    return a + b


def ring_mul(a: DPoly, b: DPoly) -> DPoly:
    return a * b


def ring_inv(a: DPoly) -> DPoly:
    return a.inv()


def shift_S(a: DPoly) -> DPoly:
    """Backward signed shift: ``S D^0 = 0``, ``S D^j = -D^{j-1}``; lowers the order by one."""
    if a.order < 1:
        raise OrderMismatch("shift needs order >= 1")
    return DPoly(-c for c in a.coeffs[1:])


def laplace_character(moments: Sequence, m: int | None = None) -> DPoly:
    """``sum_k (-1)^k mu_k D^k / k!`` from the moment sequence ``mu_0..mu_m``."""
    if m is None:
        m = len(moments) - 1
    if len(moments) < m + 1:
        raise ValueError(f"need {m + 1} moments, got {len(moments)}")
    out = []
    for k in range(m + 1):
        mk = moments[k]
        fact = math.factorial(k)
        if isinstance(mk, float):
            term = mk / fact
        else:
            term = mk * Fraction(1, fact)
        out.append(term if k % 2 == 0 else -term)
    return DPoly(out)


def apply_to_tail(a: DPoly, model, x: float) -> float:
    """Evaluate ``a`` applied to ``D^{-1} Fbar`` at ``x``.

    Coefficient ``c_k`` multiplies ``D^{k-1} Fbar``, with
    ``D^{-1} Fbar(x) = -int_x^inf Fbar``.
    """
    return sum(apply_terms(a, model, x))


def apply_terms(a: DPoly, model, x: float) -> list[float]:
    need = a.order - 1
    if need > model.k_max:
        raise ValueError(f"operator of order {a.order} needs derivative {need}, model has {model.k_max}")
    model.check_domain(x)
    out = []
    for k, c in enumerate(a.coeffs):
        if k == 0:
            f = -model.itail(x)
        elif k == 1:
            f = model.tail(x)
        else:
            f = model.dtail(k - 1, x)
        out.append(float(c) * f)
    return out
