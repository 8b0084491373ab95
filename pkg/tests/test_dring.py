import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from walktail.dring import (
    DPoly, OrderMismatch, apply_terms, apply_to_tail, laplace_character, ring_add, ring_inv, ring_mul, shift_S,
    truncate_to_min,
)
from walktail.scalars import NotInvertible, Sym, mu
from walktail.tails import make_pareto

fracs = st.fractions(min_value=-10, max_value=10, max_denominator=12)


@st.composite
def polys(draw, order=None, invertible=False):
    m = draw(st.integers(0, 6)) if order is None else order
    c = [draw(fracs) for _ in range(m + 1)]
    if invertible and c[0] == 0:
        c[0] = Fraction(1)
    return DPoly(c)


@st.composite
def triples(draw):
    m = draw(st.integers(0, 6))
    return draw(polys(m)), draw(polys(m)), draw(polys(m))


@given(triples())
def test_ring_axioms_exact(t):
    a, b, c = t
    assert (a + b) + c == a + (b + c)
    assert a + b == b + a
    assert (a * b) * c == a * (b * c)
    assert a * b == b * a
    assert a * (b + c) == a * b + a * c
    assert a + DPoly.zero(a.order) == a
    assert a * DPoly.unit(a.order) == a


@given(polys(invertible=True))
def test_inverse_round_trip_exact(a):
    assert a * a.inv() == DPoly.unit(a.order)
    assert a.inv().inv() == a


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=7))
def test_inverse_float_residual(c):
    if abs(c[0]) < 0.1:
        c[0] = 1.0
    a = DPoly(c)
    r = a * a.inv()
    scale = max(1.0, max(abs(x) for x in (a.inv()).coeffs) * max(abs(x) for x in c))
    assert abs(r.coeffs[0] - 1) < 1e-12 * scale
    assert all(abs(x) < 1e-12 * scale for x in r.coeffs[1:])


def test_examples():
    one_plus = DPoly((1, 1, 0))
    one_minus = DPoly((1, -1, 0))
    assert ring_add(one_plus, one_minus) == DPoly((2, 0, 0))
    assert ring_mul(one_plus, one_minus) == DPoly((1, 0, -1))
    assert ring_mul(DPoly((1, 1)), DPoly((1, -1))) == DPoly((1, 0))
    m = 4
    assert DPoly.monomial(1, m) * DPoly.monomial(m, m) == DPoly.zero(m)
    a = Fraction(3, 7)
    assert ring_inv(DPoly((1, -a, 0))) == DPoly((1, a, a * a))


def test_order_mismatch_and_truncation():
    with pytest.raises(OrderMismatch):
        DPoly((1, 2)) + DPoly((1, 2, 3))
    with pytest.raises(OrderMismatch):
        DPoly((1, 2)) * DPoly((1,))
    a, b = truncate_to_min(DPoly((1, 2, 3)), DPoly((4, 5)))
    assert a == DPoly((1, 2)) and b == DPoly((4, 5))
    with pytest.raises(OrderMismatch):
        DPoly((1, 2)).truncate(3)


def test_not_invertible():
    with pytest.raises(NotInvertible):
        DPoly((0, 1)).inv()
    with pytest.raises(NotInvertible):
        DPoly((Sym.var("a") + Sym.var("b"), Sym.var("a"))).inv()


def test_shift():
    c0, c1, c2 = (Sym.var(n) for n in "xyz")
    assert shift_S(DPoly((c0, c1, c2))) == DPoly((-c1, -c2))
    assert shift_S(DPoly.unit(3)) == DPoly.zero(2)
    with pytest.raises(OrderMismatch):
        shift_S(DPoly((1,)))


@given(st.integers(1, 7))
def test_shift_of_laplace_character(m):
    moms = [Sym.const(1)] + [mu("G", k) for k in range(1, m + 1)]
    s = shift_S(laplace_character(moms, m))
    for j, c in enumerate(s.coeffs):
        assert c == (-1) ** j * mu("G", j + 1) * Fraction(1, math.factorial(j + 1))


def test_laplace_character_examples():
    c = Fraction(5, 2)
    assert laplace_character([1, c, c * c]) == DPoly((1, -c, c * c / 2))
    assert laplace_character([0, 0, 0]) == DPoly.zero(2)
    f = laplace_character([1.0, 2.0, 4.0])
    assert f.coeffs == (1.0, -2.0, 2.0)
    with pytest.raises(ValueError):
        laplace_character([1, 2], m=3)


@given(fracs, fracs)
def test_laplace_character_is_linear(a, b):
    # G = delta_1, H = delta_2: mu_k(G) = 1, mu_k(H) = 2^k
    m = 2
    g = [Fraction(1)] * (m + 1)
    h = [Fraction(2**k) for k in range(m + 1)]
    mix = [a * x + b * y for x, y in zip(g, h)]
    assert laplace_character(mix, m) == laplace_character(g, m) * a + laplace_character(h, m) * b


def test_constant_term_identity_symbolic():
    from walktail.expansion import build_operator, substitute_mean
    from walktail.ladder import MomentSet

    for m in range(1, 6):
        op = substitute_mean(build_operator(MomentSet.symbolic(m), m))
        assert op.coeffs[0] == mu("F", 1).inverse()


def test_apply_to_tail_leading_term():
    model = make_pareto(3.0)
    mu_f = -1.5
    val = apply_to_tail(DPoly((1 / mu_f,)), model, 10.0)
    assert val == pytest.approx((1 / mu_f) * -(10.0**-2) / 2)
    assert val > 0
    assert apply_to_tail(DPoly((0.0, 1.0)), make_pareto(2.0), 2.0) == pytest.approx(0.25)


def test_apply_to_tail_against_quadrature_and_differences():
    model = make_pareto(3.0)
    c = (0.7, -1.3, 2.1)
    x = 10.0
    hand = c[0] * (-(10.0**-2) / 2) + c[1] * 10.0**-3 + c[2] * (-3e-4)
    # independent oracle: numerical integral and a central difference
    integral, _ = integrate.quad(lambda t: t**-3.0, x, np.inf, epsrel=1e-13)
    step = 1e-4
    deriv = ((x + step) ** -3 - (x - step) ** -3) / (2 * step)
    oracle = c[0] * -integral + c[1] * x**-3 + c[2] * deriv
    got = apply_to_tail(DPoly(c), model, x)
    assert got == pytest.approx(hand, rel=1e-12)
    assert got == pytest.approx(oracle, rel=1e-8)
    assert sum(apply_terms(DPoly(c), model, x)) == got


def test_apply_to_tail_checks_derivative_budget():
    from walktail.tails import AtomTail

    with pytest.raises(ValueError):
        apply_to_tail(DPoly((1.0, 1.0, 1.0)), AtomTail((1.0,), (1.0,)), 0.5)


def test_to_text():
    a = DPoly((mu("Fm", 1), 2 * mu("Fp", 1) * mu("Fm", 2)))
    assert a.to_text() == "1 * mu[Fm,1] + 2 * mu[Fm,2] * mu[Fp,1] * D"
    assert DPoly.zero(2).to_text() == "0"
    assert DPoly((1.5, -2.0)).to_text() == "1.5 - 2.0 * D"


def test_close_to():
    a = DPoly((1.0, 1e-301))
    assert a.close_to(DPoly((1.0 + 1e-13, 0.0)))
    assert not a.close_to(DPoly((1.0 + 1e-9, 0.0)))
