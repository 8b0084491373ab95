import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from walktail.tails import (
    AtomTail, DomainError, TailModel, deriv_check, delta_r, make_burr, make_pareto, parse_tail_spec,
    smoothness_diagnostic,
)

# integral of (1 + t^2)^-2 over (10, inf), 30-digit quadrature
BURR_C2_K2_ITAIL_10 = 0.00032937575053150873872801043406


def test_pareto_examples():
    m = make_pareto(2.0)
    assert m.tail(2.0) == 0.25
    assert m.itail(2.0) == pytest.approx(0.5)
    assert make_pareto(3.0).dtail(1, 10.0) == pytest.approx(-3e-4)
    with pytest.raises(ValueError):
        make_pareto(1.0)
    with pytest.raises(ValueError):
        make_pareto(2.0, scale=0.0)


def test_domain_is_enforced():
    with pytest.raises(DomainError):
        make_pareto(2.0, scale=1.0).tail(0.5)
    with pytest.raises(DomainError):
        make_burr(2, 1).itail(-1.0)


def test_burr_examples():
    b = make_burr(2, 1)
    assert b.tail(1.0) == 0.5
    assert b.alpha == 2
    assert make_burr(2, 2).itail(10.0) == pytest.approx(BURR_C2_K2_ITAIL_10, rel=1e-8)
    # closed form for c=2, k=1: pi/2 - atan(x)
    assert b.itail(3.0) == pytest.approx(math.pi / 2 - math.atan(3.0), rel=1e-12)
    with pytest.raises(ValueError):
        make_burr(1, 1)


def test_burr_itail_matches_mpmath_across_cutoff():
    b = make_burr(1.5, 2.0, scale=2.0)
    for x in (0.0, 3.0, b.series_cutoff * 2.0 * 0.9, b.series_cutoff * 2.0 * 1.1, 1e4):
        ref = mpmath.quad(lambda t: (1 + (t / 2) ** 1.5) ** -2, [x, x + 10, mpmath.inf])
        assert b.itail(x) == pytest.approx(float(ref), rel=1e-9)


@pytest.mark.parametrize("model", [make_pareto(2.5), make_pareto(3.0, scale=2.0, loc=1.0), make_burr(2, 1.5),
                                   make_burr(3, 1)])
def test_derivatives_by_finite_differences(model):
    for k in range(1, 5):
        for x in (5.0, 20.0):
            assert deriv_check(model, k, x, h_step=1e-4 * x) < 1e-6


@pytest.mark.parametrize("model", [make_pareto(2.5), make_burr(2, 1.5)])
def test_itail_derivative_is_minus_tail(model):
    for x in (2.0, 7.0, 50.0):
        h = 1e-4 * x
        fd = (model.itail(x + h) - model.itail(x - h)) / (2 * h)
        assert fd == pytest.approx(-model.tail(x), rel=1e-6)


@pytest.mark.parametrize("model", [make_pareto(2.5), make_burr(2, 1.5), make_burr(4, 0.75)])
def test_derivatives_regularly_varying(model):
    t = 1e6
    for k in range(0, 4):
        for lam in (2.0, 10.0):
            ratio = model.dtail(k, lam * t) / model.dtail(k, t)
            assert ratio == pytest.approx(lam ** (-model.alpha - k), rel=0.01)


@pytest.mark.parametrize("model", [make_pareto(2.5), make_burr(2, 1.5)])
def test_karamata(model):
    x = 1e6
    assert model.itail(x) * (model.alpha - 1) / (x * model.tail(x)) == pytest.approx(1.0, rel=0.01)


@given(st.floats(1.0, 1e8))
def test_tail_in_unit_interval(x):
    for model in (make_pareto(2.0), make_burr(2, 1.5)):
        assert 0.0 <= model.tail(x) <= 1.0


@given(st.floats(1.0, 1e6), st.floats(1.0, 1e6))
def test_pareto_monotone(a, b):
    lo, hi = sorted((a, b))
    m = make_pareto(2.2)
    assert m.tail(lo) >= m.tail(hi)


def test_derivative_signs_alternate():
    for model in (make_pareto(2.5), make_burr(2, 1.5)):
        for k in range(0, 6):
            assert np.sign(model.dtail(k, 30.0)) == (-1) ** k


def test_k_max_guard():
    with pytest.raises(ValueError):
        make_pareto(2.0).dtail(13, 2.0)


def test_delta_r_relative_increment():
    m = make_pareto(2.0)
    assert delta_r(m.tail, 100.0, 0.01, 0.0) == pytest.approx(100.0**2 / 99.0**2 - 1.0, rel=1e-10)
    assert delta_r(m.tail, 100.0, 0.01, 0.0) == pytest.approx(0.0203040506, rel=1e-8)


def test_smoothness_diagnostic_decays():
    m = make_pareto(2.0)
    table = smoothness_diagnostic(m, 1, 0.5, [100.0, 1000.0], [0.4, 0.1, 0.01])
    assert table.shape == (2, 3)
    for row in table:
        assert np.all(np.diff(row) < 0)


class ConstantTail(TailModel):
    k_max = 3
    x_min = 0.0

    def _tail(self, x):
        return 0.5

    def _dtail(self, k, x):
        return 0.5 if k == 0 else 0.0

    def _itail(self, x):
        return math.inf


def test_smoothness_diagnostic_of_constant_is_zero():
    table = smoothness_diagnostic(ConstantTail(), 0, 0.5, [10.0], [0.1])
    assert table[0, 0] == 0.0


def test_smoothness_diagnostic_domain():
    with pytest.raises(DomainError):
        smoothness_diagnostic(make_pareto(2.0), 1, 0.5, [1.5], [0.9])


def test_deriv_check_exact_on_quadratic():
    class Quadratic(TailModel):
        k_max = 2
        x_min = -math.inf

        def _tail(self, x):
            return x * x

        def _dtail(self, k, x):
            return 2 * x if k == 1 else 2.0

        def _itail(self, x):
            return math.inf

    assert deriv_check(Quadratic(), 1, 3.0, 1e-3) < 1e-10


def test_atom_tail():
    a = AtomTail((-1.0, 1.0), (0.75, 0.25))
    assert a.tail(0.0) == 0.25
    assert a.itail(0.0) == 0.25
    assert a.tail(-2.0) == 1.0


def test_parse_tail_spec():
    assert parse_tail_spec("pareto:alpha=2.5,scale=1").alpha == 2.5
    assert parse_tail_spec("burr:c=2,k=1.5,scale=1").alpha == 3.0
    for bad in ("gamma:a=1", "pareto:alpha", "pareto:alpha=x", "pareto:beta=2"):
        with pytest.raises(ValueError):
            parse_tail_spec(bad)
