"""Ladder probabilities and ladder-height moments.

Monte Carlo estimators run in independent batches on their own random
streams (see :mod:`walktail.streams`); standard errors are batch means over
those batches, so every number is identical for any thread count.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numba as nb
import numpy as np
from scipy import integrate

from .scalars import Q, Sym, mu
from .streams import N_BATCHES, next_uniform, run_batches
from .steps import StepDistribution, draw

TAG_DESCEND, TAG_ASCEND, TAG_SPITZER, TAG_MAX, TAG_LEMMA1 = 11, 12, 13, 14, 15

DEFAULT_CAP = 10**5
BARRIER_FACTOR = 50.0


class NonConvergence(RuntimeError):
    pass


# ---------------------------------------------------------------- kernels


@nb.njit(nogil=True, cache=True)
def _descend_kernel(kind, params, cdf, vals, key, n, k_max, cap):
    state = np.empty(1, np.uint64)
    state[0] = key
    sums = np.zeros(k_max + 1)
    capped = 0
    for _ in range(n):
        s = 0.0
        steps = 0
        while True:
            s += draw(kind, params, cdf, vals, state)
            steps += 1
            if s <= 0.0:
                v = 1.0
                for k in range(k_max + 1):
                    sums[k] += v
                    v *= s
                break
            if steps >= cap:
                capped += 1
                break
    return sums, capped


@nb.njit(nogil=True, cache=True)
def _ascend_kernel(kind, params, cdf, vals, key, n, k_max, barrier, cap, xs):
    state = np.empty(1, np.uint64)
    state[0] = key
    sums = np.zeros(k_max + 1)
    exceed = np.zeros(xs.shape[0])
    censored_barrier = 0
    censored_cap = 0
    for _ in range(n):
        s = 0.0
        steps = 0
        while True:
            s += draw(kind, params, cdf, vals, state)
            steps += 1
            if s > 0.0:
                v = 1.0
                for k in range(k_max + 1):
                    sums[k] += v
                    v *= s
                for j in range(xs.shape[0]):
                    if s > xs[j]:
                        exceed[j] += 1.0
                break
            if s < -barrier:
                censored_barrier += 1
                break
            if steps >= cap:
                censored_cap += 1
                break
    return sums, exceed, censored_barrier, censored_cap


@nb.njit(nogil=True, cache=True)
def _positive_counts_kernel(kind, params, cdf, vals, key, n, horizon):
    state = np.empty(1, np.uint64)
    state[0] = key
    counts = np.zeros(horizon)
    for _ in range(n):
        s = 0.0
        for j in range(horizon):
            s += draw(kind, params, cdf, vals, state)
            if s > 0.0:
                counts[j] += 1.0
    return counts


@nb.njit(nogil=True, cache=True)
def _maximum_kernel(kind, params, cdf, vals, key, n, barrier, cap, xs):
    state = np.empty(1, np.uint64)
    state[0] = key
    exceed = np.zeros(xs.shape[0])
    censored = 0
    capped = 0
    top = xs[xs.shape[0] - 1]
    for _ in range(n):
        s = 0.0
        m = 0.0
        steps = 0
        while True:
            s += draw(kind, params, cdf, vals, state)
            steps += 1
            if s > m:
                m = s
                if m > top:
                    break
            if s < -barrier:
                censored += 1
                break
            if steps >= cap:
                capped += 1
                break
        for j in range(xs.shape[0]):
            if m > xs[j]:
                exceed[j] += 1.0
    return exceed, censored, capped


@nb.njit(nogil=True, cache=True)
def _renewal_power_kernel(key, n, x, beta, mean_y, n_head):
    # sum_{n>=0} (x + Z_n)^-beta with exponential Y; the part after n_head
    # renewals is replaced by its exact conditional mean (memoryless)
    state = np.empty(1, np.uint64)
    state[0] = key
    out = np.empty(n)
    for i in range(n):
        z = 0.0
        s = x ** (-beta)
        for _ in range(n_head):
            z += -math.log(next_uniform(state)) * mean_y
            s += (x + z) ** (-beta)
        s += (x + z) ** (1.0 - beta) / ((beta - 1.0) * mean_y)
        out[i] = s
    return out


# ---------------------------------------------------------------- helpers


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float

    def __iter__(self):
        yield self.value
        yield self.se


def _batch_stats(per_batch: np.ndarray, sizes: np.ndarray):
    """Mean and batch-means standard error; rows are batches."""
    w = sizes / sizes.sum()
    means = per_batch / sizes.reshape((-1,) + (1,) * (per_batch.ndim - 1))
    mean = np.tensordot(w, means, axes=1)
    b = len(sizes)
    if b < 2:
        return mean, np.full_like(mean, np.nan)
    var = np.tensordot(w, (means - mean) ** 2, axes=1) * b / (b - 1)
    return mean, np.sqrt(var / b)


def default_barrier(step: StepDistribution) -> float:
    return BARRIER_FACTOR * abs(step.mean)


def _run(step, kernel, tag, reps, seed, threads, n_batches, *extra):
    kind, params, cdf, vals = step.kernel_args()

    def work(key, size):
        return kernel(kind, params, cdf, vals, key, size, *extra)

    return run_batches(work, seed, tag, reps, n_batches, threads)


def _sizes(reps, n_batches):
    from .streams import batch_sizes

    return np.array(batch_sizes(reps, n_batches), float)


# ---------------------------------------------------------------- estimators


def descending_moments(step: StepDistribution, k_max: int, reps: int, seed: int = 0, cap: int = DEFAULT_CAP,
                       threads: int | None = None, n_batches: int = N_BATCHES):
    """Monte Carlo ``E S_{tau-}^k``, ``k = 1..k_max``; returns ``(values, stderrs)``."""
    if k_max >= step.kappa:
        raise ValueError(f"k_max={k_max} must be below the lower-tail index {step.kappa}")
    res = _run(step, _descend_kernel, TAG_DESCEND, reps, seed, threads, n_batches, k_max, cap)
    capped = sum(c for _, c in res)
    if capped:
        raise NonConvergence(f"{capped} descending paths exceeded the cap of {cap} steps")
    mean, se = _batch_stats(np.array([s for s, _ in res]), _sizes(reps, n_batches))
    return mean[1:], se[1:]


@dataclass(frozen=True)
class AscentResult:
    moments: np.ndarray  # E[S_tau^k; tau < inf], k = 0..k_max
    moments_se: np.ndarray
    xs: np.ndarray
    tail: np.ndarray  # P{S_tau > x, tau < inf}
    tail_se: np.ndarray
    frac_barrier: float
    frac_cap: float
    censoring: float
    barrier: float
    cap: int


def ascend(step: StepDistribution, k_max: int, reps: int, seed: int = 0, barrier: float | None = None,
           cap: int = DEFAULT_CAP, xs=(), threads: int | None = None, n_batches: int = N_BATCHES) -> AscentResult:
    """Simulate to the first strict ascent, censoring below ``-barrier`` or after ``cap`` steps.

    ``censoring`` bounds the ascent probability lost to censoring: a censored
    path at ``-barrier`` ascends later with probability about
    ``int_barrier^inf Fbar / |mu|``; capped paths count fully.
    """
    barrier = default_barrier(step) if barrier is None else float(barrier)
    if not barrier > 0 or cap < 1:
        raise ValueError("barrier must be positive and cap >= 1")
    xs = np.sort(np.asarray(xs, float).ravel())
    res = _run(step, _ascend_kernel, TAG_ASCEND, reps, seed, threads, n_batches, k_max, barrier, cap, xs)
    sizes = _sizes(reps, n_batches)
    m, m_se = _batch_stats(np.array([r[0] for r in res]), sizes)
    if len(xs):
        t, t_se = _batch_stats(np.array([r[1] for r in res]), sizes)
    else:
        t, t_se = np.zeros(0), np.zeros(0)
    fb = sum(r[2] for r in res) / reps
    fc = sum(r[3] for r in res) / reps
    return AscentResult(m, m_se, xs, t, t_se, fb, fc, fb * _return_bound(step, barrier) + fc, barrier, cap)


def _return_bound(step: StepDistribution, barrier: float) -> float:
    tail = step.upper_tail
    x = max(barrier, tail.x_min)
    try:
        val = float(tail.itail(x))
    except Exception:
        return 1.0
    return min(1.0, val / abs(step.mean))


def ascending_moments(step: StepDistribution, k_max: int, reps: int, seed: int = 0, barrier: float | None = None,
                      cap: int = DEFAULT_CAP, threads: int | None = None, n_batches: int = N_BATCHES):
    """Defective ``E[S_tau^k; tau < inf]``, ``k = 0..k_max``; returns the full :class:`AscentResult`."""
    if k_max >= step.alpha - 1:
        raise ValueError(f"k_max={k_max} needs alpha - 1 > k_max (alpha={step.alpha})")
    return ascend(step, k_max, reps, seed, barrier, cap, (), threads, n_batches)


def estimate_p_direct(step: StepDistribution, reps: int, seed: int = 0, barrier: float | None = None,
                      cap: int = DEFAULT_CAP, threads: int | None = None, n_batches: int = N_BATCHES):
    """``P{tau < inf}`` as the ascent frequency; returns ``(Estimate, censoring indicator)``."""
    r = ascend(step, 0, reps, seed, barrier, cap, (), threads, n_batches)
    return Estimate(float(r.moments[0]), float(r.moments_se[0])), r.censoring


@dataclass(frozen=True)
class SpitzerResult:
    p: float
    se: float
    remainder: float  # extrapolated tail of the series (already included in p)
    positive: np.ndarray  # estimated P{S_n > 0}, n = 1..N


def estimate_p_spitzer(step: StepDistribution, N: int = 200, reps_per_n: int = 10**5, seed: int = 0,
                       threads: int | None = None, n_batches: int = N_BATCHES) -> SpitzerResult:
    """``1 - exp(-sum_n P{S_n > 0}/n)`` with the series tail extrapolated as a power law."""
    if N < 1:
        raise ValueError("N must be >= 1")
    res = _run(step, _positive_counts_kernel, TAG_SPITZER, reps_per_n, seed, threads, n_batches, N)
    sizes = _sizes(reps_per_n, n_batches)
    counts = np.array(res)
    n = np.arange(1, N + 1)
    per_batch_sum = (counts / n).sum(axis=1)
    s, s_se = _batch_stats(per_batch_sum, sizes)
    prob = counts.sum(axis=0) / reps_per_n
    rem = _series_remainder(prob / n, step.alpha)
    total = float(s) + rem
    p = 1.0 - math.exp(-total)
    return SpitzerResult(p, math.exp(-total) * float(s_se), rem, prob)


def _series_remainder(a: np.ndarray, alpha: float) -> float:
    """Tail ``sum_{n > N} a_n`` for ``a_n ~ C n^-gamma`` fitted on the last half."""
    N = len(a)
    idx = np.arange(N // 2, N)
    n = idx + 1.0
    vals = a[idx]
    if not np.any(vals > 0):
        return 0.0
    if math.isfinite(alpha):
        gamma = alpha
    else:
        pos = vals > 0
        if pos.sum() < 3:
            return 0.0
        gamma = -np.polyfit(np.log(n[pos]), np.log(vals[pos]), 1)[0]
        if not gamma > 1:
            return 0.0
        if gamma > 50:
            return 0.0
    c = vals.sum() / np.sum(n ** (-gamma))
    return float(c * (N + 0.5) ** (1.0 - gamma) / (gamma - 1.0))


@dataclass(frozen=True)
class MaximumResult:
    xs: np.ndarray
    tail: np.ndarray  # P{M > x}
    tail_se: np.ndarray
    frac_censored: float
    frac_cap: float
    barrier: float


def simulate_maximum(step: StepDistribution, xs, reps: int, seed: int = 0, barrier: float | None = None,
                     cap: int = DEFAULT_CAP, threads: int | None = None, n_batches: int = N_BATCHES) -> MaximumResult:
    """``P{M > x}`` by running each path until it drops below ``-barrier`` or passes ``max(xs)``."""
    barrier = default_barrier(step) if barrier is None else float(barrier)
    xs = np.sort(np.asarray(xs, float).ravel())
    res = _run(step, _maximum_kernel, TAG_MAX, reps, seed, threads, n_batches, barrier, cap, xs)
    t, t_se = _batch_stats(np.array([r[0] for r in res]), _sizes(reps, n_batches))
    return MaximumResult(xs, t, t_se, sum(r[1] for r in res) / reps, sum(r[2] for r in res) / reps, barrier)


# ---------------------------------------------------------------- renewal sums


@dataclass(frozen=True)
class Lemma1Row:
    x: float
    ratio: float
    se: float
    target: float


def lemma1_diagnostic(beta: float, x_grid, y_mean: float = 1.0, y_kind: str = "deterministic",
                      reps: int = 10**5, seed: int = 0, n_head: int = 1000, threads: int | None = None,
                      n_batches: int = N_BATCHES) -> list[Lemma1Row]:
    """``(1/(x f(x))) sum_{n>=0} E f(x + Z_n)`` for ``f(x) = x^-beta`` against ``1/((beta-1) E Y)``.

    ``Z_n`` is the renewal sequence with steps ``Y``.  For deterministic ``Y``
    the series is summed exactly up to terms below ``1e-15`` of the head and
    the remainder by Euler-Maclaurin; for exponential ``Y`` the renewals after
    ``n_head`` are replaced by their exact conditional mean.
    """
    if not beta > 1:
        raise ValueError("beta must exceed 1")
    if not y_mean > 0:
        raise ValueError("Y must have positive mean")
    target = 1.0 / ((beta - 1.0) * y_mean)
    rows = []
    for x in np.atleast_1d(np.asarray(x_grid, float)):
        scale = x * x ** (-beta)
        if y_kind == "deterministic":
            total = _power_series_sum(x, beta, y_mean)
            rows.append(Lemma1Row(float(x), total / scale, 0.0, target))
        elif y_kind == "exponential":
            res = run_batches(
                lambda key, size: _renewal_power_kernel(key, size, x, beta, y_mean, n_head).sum(),
                seed, TAG_LEMMA1, reps, n_batches, threads,
            )
            mean, se = _batch_stats(np.array(res), _sizes(reps, n_batches))
            rows.append(Lemma1Row(float(x), float(mean) / scale, float(se) / scale, target))
        else:
            raise ValueError(f"unknown Y kind {y_kind!r}")
    return rows


def _power_series_sum(x: float, beta: float, c: float, head_terms: int = 10**6) -> float:
    """``sum_{n>=0} (x + n c)^-beta``: direct head, Euler-Maclaurin remainder."""
    head = x ** (-beta)
    n = np.arange(head_terms, dtype=float)
    terms = (x + n * c) ** (-beta)
    cut = np.flatnonzero(terms < 1e-15 * head)
    if len(cut):
        return float(terms[: cut[0]].sum())
    s = float(terms.sum())
    y = x + head_terms * c
    f, fp, fppp = y ** (-beta), -beta * y ** (-beta - 1), -beta * (beta + 1) * (beta + 2) * y ** (-beta - 3)
    integral = y ** (1.0 - beta) / ((beta - 1.0) * c)
    return s + integral + f / 2.0 - c * fp / 12.0 + c**3 * fppp / 720.0


def lemma1_quadrature(f, x: float, y_mean: float) -> float:
    """Renewal-density approximation ``f(x) + int_0^inf f(x+z) dz / E Y`` (test oracle)."""
    val, _ = integrate.quad(lambda z: f(x + z), 0.0, np.inf, limit=400)
    return f(x) + val / y_mean


# ---------------------------------------------------------------- MomentSet


@dataclass
class MomentSet:
    """Ladder quantities an order-``m`` expansion needs.

    ``mu_minus[k-1] = E S_{tau-}^k`` for ``k = 1..m``; ``mu_plus[k] =
    E[S_tau^k; tau < inf]`` for ``k = 0..m-1`` with ``mu_plus[0] = p``.
    Scalars are floats, Fractions or :class:`Sym`.
    """

    m: int
    p: object
    mu_F1: object
    mu_minus: tuple
    mu_plus: tuple
    stderr: dict = field(default_factory=dict)
    source: str = "analytic"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mu_minus = tuple(self.mu_minus)
        self.mu_plus = tuple(self.mu_plus)
        if self.m < 1:
            raise ValueError("order m must be >= 1")
        if len(self.mu_minus) < self.m:
            raise ValueError(f"need mu_minus[1..{self.m}], got {len(self.mu_minus)}")
        if len(self.mu_plus) < self.m:
            raise ValueError(f"need mu_plus[0..{self.m - 1}], got {len(self.mu_plus)}")
        if not isinstance(self.p, Sym) and self.mu_plus[0] != self.p:
            raise ValueError("mu_plus[0] must equal p")

    def minus_sequence(self, m: int | None = None) -> list:
        """``mu_0..mu_m`` of F- (``mu_0 = 1``)."""
        m = self.m if m is None else m
        one = self.mu_minus[0] * 0 + 1
        return [one] + list(self.mu_minus[:m])

    def plus_sequence(self, m: int) -> list:
        """``mu_0..mu_m`` of F+ (``mu_0 = p``)."""
        if m + 1 > len(self.mu_plus):
            raise ValueError(f"need mu_plus up to order {m}")
        return list(self.mu_plus[: m + 1])

    def restrict(self, m: int) -> "MomentSet":
        if m > self.m:
            raise ValueError("cannot raise the order")
        return MomentSet(m, self.p, self.mu_F1, self.mu_minus[:m], self.mu_plus[:m], dict(self.stderr), self.source,
                         dict(self.diagnostics))

    def identity_gap(self) -> float:
        """``mu_F1 - (1 - p) mu_minus[1]``."""
        return float(self.mu_F1) - (1.0 - float(self.p)) * float(self.mu_minus[0])

    def identity_se(self) -> float:
        p, m1 = float(self.p), float(self.mu_minus[0])
        se_p = self.stderr.get("p", 0.0)
        se_m = self.stderr.get("mu_minus", [0.0])[0]
        se_f = self.stderr.get("mu_F1", 0.0)
        return math.sqrt(se_f**2 + ((1 - p) * se_m) ** 2 + (m1 * se_p) ** 2)

    def check(self, n_se: float = 3.0) -> list[str]:
        """Sign and identity checks; returns a list of problems (empty when all pass)."""
        out = []
        p = float(self.p)
        if not 0 < p < 1:
            out.append(f"p={p} outside (0, 1)")
        for k, v in enumerate(self.mu_minus, start=1):
            if v != 0 and math.copysign(1, float(v)) != (-1) ** k:
                out.append(f"mu_minus[{k}]={v} has the wrong sign")
        for k, v in enumerate(self.mu_plus):
            if float(v) < 0:
                out.append(f"mu_plus[{k}]={v} is negative")
        gap, se = abs(self.identity_gap()), self.identity_se()
        tol = n_se * se if se > 0 else 1e-9 * abs(float(self.mu_F1))
        if gap > tol:
            out.append(f"mu_F1 - (1-p) mu_minus[1] = {gap:.3e} exceeds {tol:.3e}")
        return out

    # serialization

    def to_dict(self) -> dict:
        def enc(v):
            if isinstance(v, Fraction):
                return str(v)
            if isinstance(v, Sym):
                return str(v)
            return float(v)

        d = asdict(self)
        d["p"] = enc(self.p)
        d["mu_F1"] = enc(self.mu_F1)
        d["mu_minus"] = [enc(v) for v in self.mu_minus]
        d["mu_plus"] = [enc(v) for v in self.mu_plus]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MomentSet":
        def dec(v):
            if isinstance(v, str):
                return float(Fraction(v))
            return float(v)

        required = {"m", "p", "mu_F1", "mu_minus", "mu_plus"}
        missing = required - set(d)
        if missing:
            raise ValueError(f"moment file lacks {sorted(missing)}")
        return cls(
            int(d["m"]), dec(d["p"]), dec(d["mu_F1"]), [dec(v) for v in d["mu_minus"]],
            [dec(v) for v in d["mu_plus"]], d.get("stderr", {}), d.get("source", "analytic"),
            d.get("diagnostics", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "MomentSet":
        return cls.from_dict(json.loads(text))

    # constructors

    @classmethod
    def symbolic(cls, m: int) -> "MomentSet":
        """All quantities as independent symbols; ``p`` enters through ``(1-p)``."""
        p = 1 - Q
        return cls(
            m, p, mu("F", 1), [mu("Fm", k) for k in range(1, m + 1)],
            [p] + [mu("Fp", k) for k in range(1, m)], source="symbolic",
        )

    @classmethod
    def from_lattice(cls, laws, m: int, mu_F1: float | None = None) -> "MomentSet":
        """Exact moments from lattice ladder laws (see :func:`walktail.lattice.ladder_laws`)."""
        fm, fp = laws.fminus, laws.fplus
        if mu_F1 is None:
            mu_F1 = (1.0 - laws.p) * fm.moment(1)
        return cls(
            m, laws.p, float(mu_F1), [fm.moment(k) for k in range(1, m + 1)],
            [laws.p] + [fp.moment(k) for k in range(1, m)], source="lattice-exact",
            diagnostics={"p_upper": laws.p_upper, "fminus_missing": laws.fminus_missing, "method": laws.method},
        )


def estimate_moments(step: StepDistribution, m: int, reps: int, seed: int = 0, barrier: float | None = None,
                     cap: int = DEFAULT_CAP, threads: int | None = None, n_batches: int = N_BATCHES) -> MomentSet:
    """Monte Carlo :class:`MomentSet` with standard errors and censoring diagnostics."""
    if m < 1:
        raise ValueError("order m must be >= 1")
    mm, mm_se = descending_moments(step, m, reps, seed, cap, threads, n_batches)
    k_plus = m - 1
    if k_plus >= step.alpha - 1:
        raise ValueError(f"order {m} needs E S_tau^{k_plus} finite, i.e. alpha > {m}")
    asc = ascend(step, k_plus, reps, seed, barrier, cap, (), threads, n_batches)
    p = float(asc.moments[0])
    return MomentSet(
        m, p, float(step.mean), mm.tolist(), asc.moments.tolist(),
        stderr={"p": float(asc.moments_se[0]), "mu_F1": 0.0, "mu_minus": mm_se.tolist(),
                "mu_plus": asc.moments_se.tolist()},
        source="monte-carlo",
        diagnostics={"reps": reps, "seed": seed, "barrier": asc.barrier, "cap": cap,
                     "frac_barrier": asc.frac_barrier, "frac_cap": asc.frac_cap, "censoring": asc.censoring,
                     "step": step.description},
    )
