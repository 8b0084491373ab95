import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walktail.lattice import ladder_laws
from walktail.ladder import (
    MomentSet, NonConvergence, _batch_stats, _power_series_sum, _series_remainder, ascend, descending_moments,
    estimate_moments, estimate_p_direct, estimate_p_spitzer, lemma1_diagnostic, lemma1_quadrature, simulate_maximum,
)
from walktail.scalars import Sym
from walktail.steps import make_constant, make_pareto_shift, make_two_point


def within(est, se, exact, n_se=3.0, floor=0.0):
    return abs(est - exact) <= n_se * se + floor


def test_two_point_descending_moments():
    vals, se = descending_moments(make_two_point(0.25), 3, 200_000, seed=1)
    # weak descent: 0 w.p. 1/4, -1 w.p. 3/4
    for k, exact in enumerate((-0.75, 0.75, -0.75)):
        assert within(vals[k], se[k], exact)


def test_two_point_ascending_moments_and_p():
    r = ascend(make_two_point(0.25), 2, 200_000, seed=2, barrier=50)
    assert r.censoring < 1e-6
    for k in range(3):
        assert within(r.moments[k], r.moments_se[k], 1 / 3)
    est, cens = estimate_p_direct(make_two_point(0.25), 200_000, seed=3, barrier=50)
    assert within(est.value, est.se, 1 / 3)
    assert cens < 1e-6


def test_ascent_tail_counts():
    r = ascend(make_two_point(0.25), 0, 200_000, seed=4, barrier=50, xs=[0.5, 1.5])
    assert within(r.tail[0], r.tail_se[0], 1 / 3)
    assert r.tail[1] == 0.0


def test_constant_step_is_degenerate():
    step = make_constant(1)
    vals, se = descending_moments(step, 3, 1000, seed=0)
    np.testing.assert_allclose(vals, [-1.0, 1.0, -1.0], rtol=1e-14)
    np.testing.assert_allclose(se, 0.0, atol=1e-14)
    est, cens = estimate_p_direct(step, 1000, seed=0)
    assert est.value == 0.0 and est.se == pytest.approx(0.0, abs=1e-15)
    assert estimate_p_spitzer(step, 50, 1000, seed=0).p == 0.0


def test_spitzer_two_point():
    r = estimate_p_spitzer(make_two_point(0.25), 200, 50_000, seed=5)
    # light tails: remainder negligible
    assert r.remainder < 1e-6
    assert within(r.p, r.se, 1 / 3, floor=1e-6)


def test_spitzer_matches_direct_heavy_tail():
    step = make_pareto_shift(3, 1, 3)
    sp = estimate_p_spitzer(step, 200, 50_000, seed=6)
    d, cens = estimate_p_direct(step, 100_000, seed=7, barrier=160)
    assert abs(sp.p - d.value) <= 3 * math.hypot(sp.se, d.se) + sp.remainder + cens


def test_censoring_indicator_shrinks_with_barrier():
    step = make_pareto_shift(3, 1, 3)
    cens = [estimate_p_direct(step, 20_000, seed=8, barrier=b)[1] for b in (20, 40, 80, 160)]
    assert all(a > b for a, b in zip(cens, cens[1:]))


def test_cap_raises_for_descent():
    # q close to 1/2: some descents take longer than 2 steps
    with pytest.raises(NonConvergence):
        descending_moments(make_two_point(0.45), 1, 10_000, seed=0, cap=2)


def test_kmax_guards():
    step = make_pareto_shift(3, 1, 3)
    from walktail.ladder import ascending_moments

    with pytest.raises(ValueError):
        ascending_moments(step, 2, 10, seed=0)
    with pytest.raises(ValueError):
        estimate_moments(step, 3, 10, seed=0)


def test_thread_count_does_not_change_results():
    step = make_pareto_shift(3, 1, 3)
    a = estimate_moments(step, 2, 20_000, seed=9, threads=1)
    b = estimate_moments(step, 2, 20_000, seed=9, threads=4)
    assert a.to_json() == b.to_json()


def test_moment_estimates_agree_with_lattice_oracle():
    step = make_two_point(0.3, up=2, down=1)
    exact = MomentSet.from_lattice(ladder_laws(step), 2, step.mean)
    est = estimate_moments(step, 2, 200_000, seed=10, barrier=60)
    assert within(est.p, est.stderr["p"], exact.p)
    for k in range(2):
        assert within(est.mu_minus[k], est.stderr["mu_minus"][k], exact.mu_minus[k])
        assert within(est.mu_plus[k], est.stderr["mu_plus"][k], exact.mu_plus[k])
    assert est.check() == []
    assert exact.check() == []


def test_simulated_maximum_two_point():
    r = simulate_maximum(make_two_point(0.25), [0.5, 1.5, 2.5], 200_000, seed=11, barrier=40)
    for x, t, s in zip(r.xs, r.tail, r.tail_se):
        assert within(t, s, 3.0 ** -math.ceil(x))


@given(st.lists(st.floats(0, 10), min_size=3, max_size=12), st.integers(1, 5))
def test_batch_stats_constant_batches(values, size):
    per = np.full(len(values), size * 2.5)
    mean, se = _batch_stats(per, np.full(len(values), float(size)))
    assert mean == pytest.approx(2.5)
    assert se == pytest.approx(0.0, abs=1e-12)


@given(st.floats(1.5, 6), st.floats(1.5, 4))
@settings(max_examples=30)
def test_series_remainder_exact_for_power_law(gamma, c):
    n = np.arange(1, 201, dtype=float)
    rem = _series_remainder(c * n**-gamma, gamma)
    exact = c * sum(k**-gamma for k in range(201, 400_000)) + c * 400_000 ** (1 - gamma) / (gamma - 1)
    assert rem == pytest.approx(exact, rel=0.02)


# ---------------------------------------------------------------- renewal sums


def test_power_series_sum_against_direct_sum():
    direct = sum((5.0 + n * 0.5) ** -3 for n in range(2_000_000))
    assert _power_series_sum(5.0, 3.0, 0.5) == pytest.approx(direct, rel=1e-7)


def test_renewal_ratio_deterministic_reference_value():
    (row,) = lemma1_diagnostic(2.0, [100.0])
    assert row.target == 1.0
    assert row.ratio == pytest.approx(1.005, abs=2e-4)


@pytest.mark.parametrize("beta,c", [(2.0, 1.0), (3.0, 2.0), (2.5, 0.5)])
def test_renewal_ratio_deterministic_converges(beta, c):
    rows = lemma1_diagnostic(beta, [10.0, 100.0, 1000.0, 10000.0], y_mean=c)
    gaps = [abs(r.ratio - r.target) for r in rows]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3 * rows[-1].target


def test_renewal_ratio_exponential_steps():
    # with exponential Y the renewal measure is exactly delta_0 + Lebesgue / EY
    rows = lemma1_diagnostic(2.0, [10.0, 100.0], y_mean=1.0, y_kind="exponential", reps=20_000, seed=12)
    for r in rows:
        exact = lemma1_quadrature(lambda t: t**-2.0, r.x, 1.0) / (r.x * r.x**-2.0)
        assert exact == pytest.approx(1 + 1 / r.x)
        assert within(r.ratio, r.se, exact, n_se=4)


def test_renewal_ratio_rejects_bad_inputs():
    with pytest.raises(ValueError):
        lemma1_diagnostic(1.0, [10.0])
    with pytest.raises(ValueError):
        lemma1_diagnostic(2.0, [10.0], y_kind="gamma")


# ---------------------------------------------------------------- MomentSet


def test_moment_set_json_round_trip():
    ms = MomentSet(2, 0.25, -1.5, [-2.0, 6.0], [0.25, 0.4], {"p": 0.001}, "monte-carlo", {"reps": 10})
    back = MomentSet.from_json(ms.to_json())
    assert back == ms


def test_moment_set_validation():
    with pytest.raises(ValueError):
        MomentSet(2, 0.25, -1.5, [-2.0], [0.25, 0.4])
    with pytest.raises(ValueError):
        MomentSet(1, 0.25, -1.5, [-2.0], [0.3])
    with pytest.raises(ValueError):
        MomentSet.from_dict({"m": 1, "p": 0.2})


def test_moment_set_checks_flag_problems():
    good = MomentSet(1, 0.25, -1.5, [-2.0], [0.25])
    assert good.check() == []
    bad = MomentSet(2, 0.25, -1.0, [2.0, -1.0], [0.25, 0.1])
    problems = bad.check()
    assert any("wrong sign" in s for s in problems)
    assert any("exceeds" in s for s in problems)


def test_symbolic_moment_set():
    ms = MomentSet.symbolic(3)
    assert all(isinstance(v, Sym) for v in ms.mu_minus)
    assert len(ms.plus_sequence(2)) == 3
    assert ms.restrict(2).m == 2
