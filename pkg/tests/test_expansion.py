import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walktail.dring import DPoly
from walktail.expansion import (
    OrderError, apply_penultimate, build_operator, check_order, display_coefficients, evaluate, expand,
    fplus_operator, penultimate_operator, residual_diagnostic, substitute_mean, value_stderr,
)
from walktail.ladder import MomentSet
from walktail.lattice import ladder_laws
from walktail.scalars import Q, Sym, mu
from walktail.steps import make_pareto_shift, make_two_point
from walktail.tails import make_pareto


def two_point_moments(m=3):
    # q = 1/4: p = 1/3, F+ = 1/3 delta_1, F- = 1/4 delta_0 + 3/4 delta_-1
    third = Fraction(1, 3)
    minus = [Fraction(3, 4) * (-1) ** k for k in range(1, m + 1)]
    return MomentSet(m, third, Fraction(-1, 2), minus, [third] * m)


@st.composite
def numeric_moments(draw, m=4):
    p = draw(st.floats(0.05, 0.9))
    minus = [(-1) ** k * draw(st.floats(0.2, 5.0)) for k in range(1, m + 1)]
    plus = [p] + [draw(st.floats(0.01, 5.0)) for _ in range(1, m)]
    return MomentSet(m, p, (1 - p) * minus[0], minus, plus)


def test_first_coefficient_is_reciprocal_mean():
    ms = two_point_moments()
    for m in (1, 2, 3):
        assert build_operator(ms, m).coeffs[0] == Fraction(-2)


def test_two_point_exact_second_coefficient():
    op = build_operator(two_point_moments(), 2)
    # (2/3 * 3/4 + 4/3 * 3/4) / (2 * 1/4)
    assert op.coeffs == (Fraction(-2), Fraction(3))


def test_symbolic_operator_matches_closed_form():
    op = substitute_mean(build_operator(MomentSet.symbolic(4), 4))
    for got, want in zip(op.coeffs[:3], display_coefficients()):
        assert (got - want).is_zero()
    assert op.coeffs[0] == mu("F", 1).inverse()


def test_symbolic_operators_are_nested():
    big = build_operator(MomentSet.symbolic(4), 4)
    small = build_operator(MomentSet.symbolic(3), 3)
    for a, b in zip(big.coeffs[:3], small.coeffs):
        assert (a - b).is_zero()


@settings(max_examples=50)
@given(numeric_moments())
def test_numeric_operators_are_nested(ms):
    for m in range(2, 5):
        assert build_operator(ms, m).truncate(m - 2).close_to(build_operator(ms.restrict(m - 1), m - 1), rtol=1e-10)


@settings(max_examples=50)
@given(numeric_moments())
def test_maximum_operator_factorizes(ms):
    for m in range(1, 5):
        full = build_operator(ms, m)
        pen = penultimate_operator(ms, m - 1)
        assert full.close_to(pen * fplus_operator(ms, m), rtol=1e-10)
        assert pen.coeffs[0] == pytest.approx(1 / (1 - ms.p))


@given(numeric_moments(1))
def test_fplus_leading_coefficient(ms):
    assert fplus_operator(ms, 1).coeffs == (pytest.approx(1 / ms.mu_minus[0]),)


def test_order_one_value_is_integrated_tail_over_mean():
    step = make_pareto_shift(3, 1, 3)
    ms = MomentSet(1, 0.06, step.mean, [step.mean / 0.94], [0.06])
    res = expand(ms, 1, alpha=3)
    val = res.value(step.upper_tail, 10.0)[0]
    assert val == pytest.approx(1 / (2 * 13**2) / 1.5, rel=1e-12)
    assert val == pytest.approx(1.972e-3, abs=1e-6)


@settings(max_examples=30)
@given(numeric_moments(3), st.floats(0.1, 10.0), st.floats(5.0, 100.0))
def test_value_is_linear_in_the_tail(ms, c, x):
    model = make_pareto(4.5, 1.0)
    res = expand(ms, 3, alpha=4.5)
    scaled = type("Scaled", (), {
        "tail": lambda self, t: c * model.tail(t),
        "dtail": lambda self, k, t: c * model.dtail(k, t),
        "itail": lambda self, t: c * model.itail(t),
        "k_max": model.k_max,
        "check_domain": lambda self, t: None,
    })()
    assert res.value(scaled, x)[0] == pytest.approx(c * res.value(model, x)[0], rel=1e-12)


def test_terms_shrink_by_powers_of_x():
    ms = two_point_moments(3)
    model = make_pareto(5.0)
    res = expand(ms, 3, alpha=5)
    t = res.terms(model, [100.0, 1000.0])
    ratios = np.abs(t[1] / t[0])
    # term k carries D^{k-1} Fbar ~ x^{-alpha - k + 2}
    np.testing.assert_allclose(ratios, 10.0 ** np.array([-4.0, -5.0, -6.0]), rtol=0.02)


def test_evaluate_returns_sum_of_terms():
    res = expand(two_point_moments(2), 2, alpha=5)
    vals, terms = evaluate(res, make_pareto(5.0), [10.0, 20.0])
    np.testing.assert_allclose(vals, terms.sum(axis=1))
    assert terms.shape == (2, 2)


def test_fplus_target():
    res = expand(two_point_moments(2), 2, alpha=5, target="fplus")
    assert res.target == "fplus"
    assert res.operator.coeffs[0] == Fraction(-4, 3)


def test_order_guard():
    check_order(2, alpha=3.0)
    with pytest.raises(OrderError):
        check_order(3, alpha=3.0)
    with pytest.raises(OrderError):
        check_order(0)
    with pytest.raises(OrderError):
        check_order(2, alpha=5, kappa=2)
    with pytest.warns(UserWarning):
        check_order(2, alpha=2.4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_order(2, alpha=2.6)


def test_operator_needs_enough_moments():
    with pytest.raises(ValueError):
        build_operator(two_point_moments(2), 3)


def test_residual_diagnostic_against_itself():
    res = expand(two_point_moments(2), 2, alpha=5)
    model = make_pareto(5.0)
    xs = np.linspace(10, 100, 10)
    table = residual_diagnostic(res, model, lambda x: res.value(model, x), xs)
    np.testing.assert_array_equal(table.residual, 0.0)
    assert table.passes()


def test_residual_table_detects_growth():
    res = expand(two_point_moments(1), 1, alpha=5)
    model = make_pareto(5.0)
    xs = np.linspace(10, 100, 10)
    table = residual_diagnostic(res, model, res.value(model, xs) * 2, xs)
    # residual equals the leading term, scaled residual constant 1: passes (nonincreasing)
    np.testing.assert_allclose(table.scaled, 1.0)
    grow = residual_diagnostic(res, model, res.value(model, xs) * (1 + xs / 10), xs)
    assert not grow.passes()


def test_apply_penultimate_with_exact_fplus():
    ms = two_point_moments(2)
    op = penultimate_operator(ms, 1)
    model = make_pareto(5.0)
    derivs = [model.tail, lambda x: model.dtail(1, x)]
    got = apply_penultimate(op, derivs, 20.0)
    want = float(op.coeffs[0]) * model.tail(20.0) + float(op.coeffs[1]) * model.dtail(1, 20.0)
    assert got == pytest.approx(want)
    with pytest.raises(ValueError):
        apply_penultimate(op, derivs[:1], 20.0)


def test_value_stderr_scales_with_moment_errors():
    ms = MomentSet(2, 0.3, -1.0, [-1.5, 4.0], [0.3, 0.5], {"p": 1e-3, "mu_minus": [1e-3, 1e-2], "mu_plus": [1e-3, 1e-3]})
    model = make_pareto(3.5)
    se = value_stderr(ms, 2, model, [10.0, 50.0])
    assert np.all(se > 0)
    ms2 = MomentSet(2, 0.3, -1.0, [-1.5, 4.0], [0.3, 0.5], {"p": 2e-3, "mu_minus": [2e-3, 2e-2], "mu_plus": [2e-3, 2e-3]})
    np.testing.assert_allclose(value_stderr(ms2, 2, model, [10.0, 50.0]), 2 * se, rtol=0.05)
    bare = MomentSet(2, 0.3, -1.0, [-1.5, 4.0], [0.3, 0.5])
    np.testing.assert_array_equal(value_stderr(bare, 2, model, [10.0]), 0.0)


def test_lattice_moments_give_exact_rational_like_values():
    laws = ladder_laws(make_two_point(0.25))
    ms = MomentSet.from_lattice(laws, 2, -0.5)
    op = build_operator(ms, 2)
    assert float(op.coeffs[0]) == pytest.approx(-2.0, abs=1e-10)
    assert float(op.coeffs[1]) == pytest.approx(3.0, abs=1e-9)


def test_constant_terms_of_unit_polynomials():
    one = DPoly.unit(3, Fraction(1))
    assert (one * one).coeffs[0] == 1
    assert isinstance(Q, Sym)
    assert math.isclose(float(two_point_moments().p), 1 / 3)
