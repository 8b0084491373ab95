"""Exact symbolic scalars: Laurent polynomials with rational coefficients.

A ``Sym`` is a finite sum ``c * s1^e1 * s2^e2 * ...`` where the exponents are
(possibly negative) integers.  This is enough to invert every constant term
met by the expansion operator (products of ``(1-p)`` and ``mu[Fm,1]``) while
keeping equality exact and canonical.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational


class NotInvertible(ArithmeticError):
    """Raised when an element without a multiplicative inverse is inverted."""


def _mono_mul(a, b):
    exps = dict(a)
    for name, e in b:
        exps[name] = exps.get(name, 0) + e
    return tuple(sorted((n, e) for n, e in exps.items() if e != 0))


def _mono_pow(a, k):
    return tuple((n, e * k) for n, e in a) if k else ()


def _sort_key(name):
    # mu[Fm,10] sorts after mu[Fm,2]
    head, _, tail = name.partition(",")
    digits = tail.rstrip("]")
    return (head, int(digits) if digits.isdigit() else 0, name)


class Sym:
    __slots__ = ("_terms", "_hash")

    def __init__(self, terms=None):
        clean = {}
        for mono, c in (terms or {}).items():
            c = Fraction(c)
            if c:
                clean[mono] = clean.get(mono, 0) + c
        self._terms = {m: c for m, c in clean.items() if c}
        self._hash = None

    @classmethod
    def var(cls, name: str) -> "Sym":
        return cls({((name, 1),): Fraction(1)})

    @classmethod
    def const(cls, value) -> "Sym":
        return cls({(): Fraction(value)})

    @property
    def terms(self):
        return dict(self._terms)

    @staticmethod
    def _lift(other):
        if isinstance(other, Sym):
            return other
        if isinstance(other, (int, Rational)):
            return Sym.const(other)
        return NotImplemented

    def is_zero(self) -> bool:
        return not self._terms

    def is_monomial(self) -> bool:
        return len(self._terms) == 1

    def symbols(self) -> set[str]:
        return {n for mono in self._terms for n, _ in mono}

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0) + c
        return Sym(out)

    __radd__ = __add__

    def __neg__(self):
        return Sym({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Sym(out)

    __rmul__ = __mul__

    def inverse(self) -> "Sym":
        if not self.is_monomial():
            raise NotInvertible(f"cannot invert non-monomial {self}")
        (mono, c), = self._terms.items()
        return Sym({_mono_pow(mono, -1): 1 / c})

    def __truediv__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return other * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        out = Sym.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def subs(self, name: str, value) -> "Sym":
        """Substitute ``value`` for the symbol ``name``.

        Negative powers of ``name`` require ``value`` to be invertible.
        """
        value = self._lift(value)
        out = Sym()
        for mono, c in self._terms.items():
            term = Sym.const(c)
            for n, e in mono:
                term = term * (value ** e if n == name else Sym({((n, e),): 1}))
            out = out + term
        return out

    def evaluate(self, env: dict):
        """Numeric value with symbols looked up in ``env``."""
        total = 0
        for mono, c in self._terms.items():
            v = c
            for n, e in mono:
                v = v * env[n] ** e
            total = total + v
        return total

    def sorted_terms(self):
        def key(item):
            mono = item[0]
            return [(_sort_key(n), -e) for n, e in mono]

        return sorted(self._terms.items(), key=key)

    def __str__(self):
        if not self._terms:
            return "0"
        return " + ".join(_term_text(c, mono) for mono, c in self.sorted_terms()).replace("+ -", "- ")

    def __repr__(self):
        return f"Sym({self})"


def _term_text(c: Fraction, mono) -> str:
    parts = [str(c)]
    for n, e in sorted(mono, key=lambda t: _sort_key(t[0])):
        parts.append(n if e == 1 else f"{n}^{e}")
    return " * ".join(parts)


def mu(dist: str, k: int) -> Sym:
    """Moment symbol, e.g. ``mu("Fm", 2)`` renders as ``mu[Fm,2]``."""
    return Sym.var(f"mu[{dist},{k}]")


Q = Sym.var("(1-p)")
