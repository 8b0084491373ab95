"""Exact computations for lattice random walks.

Ladder-height laws, the Wiener-Hopf identity and the compound-geometric law
of the maximum, each with a certified bound on the truncation error.  These
are the ground truth the asymptotic expansions and Monte Carlo are checked
against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .steps import LatticeDist, StepDistribution
from .tails import TailModel

MAX_SUPPORT = 2**14
DEFAULT_EPS = 1e-12


class ConvergenceError(RuntimeError):
    pass


def _as_lattice(step) -> LatticeDist:
    if isinstance(step, LatticeDist):
        return step
    if isinstance(step, StepDistribution) and step.lattice is not None:
        return step.lattice
    raise TypeError("expected a LatticeDist or a lattice StepDistribution")


def lundberg_root(lat: LatticeDist) -> float:
    """Positive root of ``E exp(theta X) = 1``; ``inf`` if ``X <= 0`` a.s."""
    pts, ms = lat.points, lat.masses
    keep = ms > 0
    pts, ms = pts[keep], ms[keep]
    if pts.max() <= 0:
        return math.inf
    logm = np.log(ms)

    def g(theta):
        return logsumexp(logm + theta * pts)

    hi = 1.0 / pts.max()
    while g(hi) <= 0:
        hi *= 2.0
    return brentq(g, hi * 1e-12 if g(hi * 1e-12) < 0 else hi / 2**40, hi, xtol=1e-15, rtol=1e-14)


@dataclass(frozen=True, eq=False)
class LadderLaws:
    fplus: LatticeDist  # defective, mass on indices >= 1
    fminus: LatticeDist  # proper, mass on indices <= 0
    p: float
    p_upper: float
    fplus_missing: float  # bound on F+ mass not captured, anywhere on (0, inf)
    fminus_missing: float
    iterations: int
    method: str

    @property
    def h(self) -> float:
        return self.fplus.h

    def fplus_tail(self, k: int) -> float:
        """Lower bound for ``P{S_tau > k h, tau < inf}``."""
        return self.fplus.tail_index(k)

    def fplus_tail_upper(self, k: int) -> float:
        return self.fplus.tail_index(k) + self.fplus_missing


def ladder_laws(step, B_trunc: float | None = None, eps: float = DEFAULT_EPS, method: str = "auto",
                max_iter: int = 10**6) -> LadderLaws:
    """Strict ascending and weak descending ladder-height laws of a lattice step.

    ``method="absorbing"`` pushes walk mass forward until it is absorbed on
    first entry to ``(0, inf)`` (or, in a second pass, to ``(-inf, 0]``);
    mass pushed below ``-B_trunc`` is charged to the error bound through
    Lundberg's inequality.  ``method="factor"`` solves the two half-line
    equations of the Wiener-Hopf factorization by alternating substitution,
    which is much cheaper for long upper supports.
    """
    lat = _as_lattice(step).trimmed()
    if abs(lat.total - 1.0) > 1e-12:
        raise ValueError(f"step must be proper, total mass {lat.total}")
    if not lat.mean() < 0:
        raise ValueError(f"step mean must be negative, got {lat.mean()}")
    if lat.hi <= 0:
        return LadderLaws(LatticeDist(lat.h, 1, np.zeros(1)), lat, 0.0, 0.0, 0.0, 0.0, 0, "trivial")
    if method == "auto":
        method = "absorbing" if len(lat.masses) <= 256 else "factor"
    if method == "absorbing":
        return _absorbing(lat, B_trunc, eps, max_iter)
    if method == "factor":
        return _factor(lat, eps, max_iter)
    raise ValueError(f"unknown method {method!r}")


def _absorbing(lat: LatticeDist, B_trunc, eps, max_iter) -> LadderLaws:
    h, a, b = lat.h, lat.lo, lat.hi
    f = lat.masses
    theta = lundberg_root(lat)
    if B_trunc is None:
        B = int(math.ceil(math.log(1e3 / eps) / (theta * h))) - a
    else:
        B = int(math.ceil(B_trunc / h))
    if (B + 1) * len(f) > 64 * MAX_SUPPORT**2:
        raise ValueError("truncation range too large for direct convolution")
    stop = eps * 1e-3

    # first entry to (0, inf); state covers indices -B..0
    state = np.zeros(B + 1)
    state[B] = 1.0
    acc_plus = np.zeros(b + 1)
    leak = 0.0
    for it in range(max_iter):
        conv = np.convolve(state, f)
        jpos = 1 + B - a
        acc_plus[1:] += conv[jpos:]
        leak += conv[:-a].sum() if a < 0 else 0.0
        state = conv[-a:jpos] if a < 0 else conv[:jpos]
        if state.sum() < stop:
            break
    else:
        raise ConvergenceError(f"ascending pass did not reach eps={eps} in {max_iter} iterations")
    it_plus = it + 1
    plus_missing = state.sum() + leak * math.exp(-theta * (B + 1) * h)

    # first entry to (-inf, 0]; state covers indices 1..B
    U = B
    acc_minus = np.zeros(-a + 1)
    state = np.zeros(U)
    conv = f
    base = a
    leak2 = 0.0
    for it in range(max_iter):
        # conv[j] is index base + j
        for j in range(len(conv)):
            idx = base + j
            if idx <= 0:
                acc_minus[idx - a] += conv[j]
            else:
                break
        first_pos = max(0, 1 - base)
        state = np.zeros(U)
        seg = conv[first_pos : first_pos + U]
        state[: len(seg)] = seg
        leak2 += conv[first_pos + U :].sum()
        if state.sum() < stop:
            break
        conv = np.convolve(state, f)
        base = 1 + a
    else:
        raise ConvergenceError(f"descending pass did not reach eps={eps} in {max_iter} iterations")
    minus_missing = state.sum() + leak2

    fplus = LatticeDist(h, 0, acc_plus)
    fminus = LatticeDist(h, a, acc_minus)
    p = fplus.total
    return LadderLaws(fplus, fminus, p, p + plus_missing, plus_missing, minus_missing, max(it_plus, it + 1),
                      "absorbing")


@nb.njit(cache=True)
def _factor_sweeps(f_neg, f_pos, fm, fp, eps, max_iter):
    # f_neg[i] = P{X = -K + i}, i = 0..K ; f_pos[j] = P{X = j}, j = 0..N (f_pos[0] unused)
    # fm[i] is F- at index -K + i ; fp[j] is F+ at index j
    K = f_neg.shape[0] - 1
    N = f_pos.shape[0] - 1
    missing = 1.0
    for it in range(max_iter):
        prev = missing
        denom = 1.0 - fm[K]
        for j in range(N, 0, -1):
            s = f_pos[j]
            for i in range(1, K + 1):
                if j + i > N:
                    break
                s += fm[K - i] * fp[j + i]
            fp[j] = s / denom
        for jj in range(K + 1):
            j = jj - K
            s = f_neg[jj]
            for ap in range(1, min(j + K, N) + 1):
                s += fp[ap] * fm[jj - ap]
            fm[jj] = s
        total = 0.0
        for i in range(K + 1):
            total += fm[i]
        missing = 1.0 - total
        # stop at eps, or once rounding keeps the missing mass from shrinking
        if missing < eps or missing >= prev:
            return it + 1, missing
    return max_iter, missing


def _factor(lat: LatticeDist, eps, max_iter) -> LadderLaws:
    h, a, b = lat.h, lat.lo, lat.hi
    if a > 0:
        raise ValueError("step has no mass on (-inf, 0]")
    K = -a
    f_neg = lat.dense(a, 0)
    f_pos = lat.dense(0, b)
    fm = f_neg.copy()
    fp = np.zeros(b + 1)
    iters, missing = _factor_sweeps(f_neg, f_pos, fm, fp, eps * 1e-3, max_iter)
    if missing >= eps:
        raise ConvergenceError(f"factor iteration stalled at missing mass {missing:.3e}")
    missing = max(missing, 0.0)
    fminus = LatticeDist(h, a, fm)
    fplus = LatticeDist(h, 0, fp)
    p = fplus.total
    mu1 = fminus.moment(1)
    # mu_F = (1 - p) mu_{F-,1}; the unseen F- mass lies in [-K h, 0]
    p_hi = 1.0 - lat.mean() / (mu1 - K * h * missing)
    p_hi = min(max(p_hi, p), 1.0)
    return LadderLaws(fplus, fminus, p, p_hi, p_hi - p, missing, int(iters), "factor")


def wiener_hopf_residual(step, laws: LadderLaws) -> float:
    """``max |F - (F+ + F- - F+ * F-)|`` over the lattice."""
    lat = _as_lattice(step)
    conv = laws.fplus.convolve(laws.fminus)
    lo = min(lat.lo, laws.fminus.lo, conv.lo)
    hi = max(lat.hi, laws.fplus.hi, conv.hi)
    r = lat.dense(lo, hi) - (laws.fplus.dense(lo, hi) + laws.fminus.dense(lo, hi) - conv.dense(lo, hi))
    return float(np.max(np.abs(r)))


def step_tail_on_lattice(step, top: int | None = None) -> np.ndarray:
    """``P{X > k h}`` for ``k = 0..top``."""
    lat = _as_lattice(step)
    top = lat.hi if top is None else top
    m = lat.dense(0, max(top, lat.hi))
    tail = np.concatenate([np.cumsum(m[::-1])[::-1][1:], [0.0]])
    return tail[: top + 1]


def apply_u(fminus: LatticeDist, g: np.ndarray) -> np.ndarray:
    """``U g(t) = sum_u g(t - u) F-{u}`` on indices ``0..len(g)-1``; ``g`` vanishes beyond its end."""
    out = np.zeros_like(g)
    n = len(g)
    for u in range(fminus.lo, min(fminus.hi, 0) + 1):
        w = fminus.mass_at(u)
        if w == 0.0:
            continue
        s = -u
        out[: n - s] += w * g[s:]
    return out


def fplus_via_representation(step, fminus: LatticeDist, n_terms: int = 10**6, eps: float = DEFAULT_EPS):
    """``Fbar+ = sum_i U^i Fbar`` on indices ``0..top``; returns ``(values, terms_used)``."""
    g = step_tail_on_lattice(step)
    total = g.copy()
    cur = g
    for i in range(1, n_terms + 1):
        cur = apply_u(fminus, cur)
        total += cur
        if cur.max() < eps:
            return total, i
    raise ConvergenceError(f"representation did not converge in {n_terms} terms")


@dataclass(frozen=True, eq=False)
class MaxTail:
    """``P{M > k h}`` for ``k = 0..k_max`` with a certified interval."""

    h: float
    lower: np.ndarray
    upper: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return np.arange(len(self.lower)) * self.h

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def at_least(self, k: int) -> tuple[float, float]:
        """Interval for ``P{M >= k h}``."""
        if k <= 0:
            return 1.0, 1.0
        return float(self.lower[k - 1]), float(self.upper[k - 1])


def compound_geometric_tail(H: LatticeDist, p: float, eps: float = DEFAULT_EPS, k_max: int | None = None) -> MaxTail:
    """Tail of ``W = (1-p) sum_n p^n H^{*n}`` at lattice points ``0..k_max``.

    ``H`` must be proper with mass on indices >= 1.  Terms are added until
    ``p^n < eps`` or until ``H^{*n}`` has left ``[0, k_max]``; the unadded
    geometric mass is the width of the returned interval.
    """
    h = H.h
    if k_max is None:
        k_max = H.hi
    if k_max + 1 > MAX_SUPPORT:
        raise ValueError(f"k_max={k_max} exceeds the direct-convolution limit {MAX_SUPPORT}")
    if not 0 <= p < 1:
        raise ValueError("p must lie in [0, 1)")
    if p == 0:
        z = np.zeros(k_max + 1)
        return MaxTail(h, z, z.copy())
    if H.lo < 1:
        raise ValueError("H must live on positive lattice points")
    if abs(H.total - 1) > 1e-9:
        raise ValueError(f"H must be proper, total={H.total}")
    hk = H.dense(0, k_max)
    acc = np.zeros(k_max + 1)
    acc[0] = 1.0 - p
    cur = np.zeros(k_max + 1)
    cur[0] = 1.0
    n = 0
    trunc = 0.0
    while True:
        if p ** (n + 1) < eps:
            trunc = p ** (n + 1)
            break
        cur = np.convolve(cur, hk)[: k_max + 1]
        n += 1
        if not cur.any():
            break
        acc += (1.0 - p) * p**n * cur
    wbar = np.clip(1.0 - np.cumsum(acc), 0.0, 1.0)
    return MaxTail(h, np.clip(wbar - trunc, 0.0, 1.0), wbar)


def maximum_tail(laws: LadderLaws, k_max: int, eps: float = DEFAULT_EPS) -> MaxTail:
    """``P{M > k h}`` from ladder laws, widening the interval by the ladder error bound."""
    if laws.p == 0:
        z = np.zeros(k_max + 1)
        return MaxTail(laws.h, z, np.full(k_max + 1, laws.fplus_missing))
    H = LatticeDist(laws.h, laws.fplus.offset, laws.fplus.masses / laws.p).trimmed()
    base = compound_geometric_tail(H, laws.p, eps, k_max)
    widen = laws.fplus_missing / (1.0 - laws.p_upper) if laws.p_upper < 1 else 1.0
    return MaxTail(base.h, base.lower, np.minimum(base.upper + widen, 1.0))


def spitzer_p(step, n_max: int = 10**5, tol: float = 1e-16) -> float:
    """``1 - exp(-sum_n P{S_n > 0} / n)`` with exact lattice convolution powers.

    Mass far below zero is dropped once its Lundberg weight ``exp(theta x)``
    is negligible, and far-right mass once its total is, which keeps the
    support bounded; this is meant for light or short-supported lattices.
    """
    lat = _as_lattice(step).trimmed()
    if lat.hi <= 0:
        return 0.0
    theta = lundberg_root(lat)
    total = 0.0
    cur = LatticeDist(lat.h, 0, np.ones(1))
    for n in range(1, n_max + 1):
        cur = cur.convolve(lat)
        term = cur.tail_index(0) / n
        total += term
        if term < tol and n > 10:
            return 1.0 - math.exp(-total)
        weight = np.cumsum(cur.masses * np.exp(theta * np.minimum(cur.points, 0.0)))
        cut = int(np.searchsorted(weight, tol * 1e-4))
        # far-right mass adds at most its size times log(n_max) to the series
        top = len(cur.masses) - int(np.searchsorted(np.cumsum(cur.masses[::-1]), tol * 1e-6))
        if cut > 0 or top < len(cur.masses):
            cur = LatticeDist(cur.h, cur.offset + cut, cur.masses[cut:max(top, cut + 1)])
        if len(cur.masses) > MAX_SUPPORT:
            raise ValueError("convolution power exceeds the direct-convolution limit")
    raise ConvergenceError(f"series not converged after {n_max} terms")


def discretize(step: StepDistribution, h: float, lo: float | None = None, hi: float | None = None,
               leak_budget: float = 1e-8, max_points: int = MAX_SUPPORT):
    """Bin ``step`` onto the grid ``k h`` (cell ``[(k-1/2)h, (k+1/2)h)`` goes to ``k h``).

    Mass outside the range is folded into the end cells and reported as
    ``leak``.  Returns ``(LatticeDist, leak)``.
    """
    if not h > 0:
        raise ValueError("grid step must be positive")
    if step.lattice is not None:
        lat = step.lattice
        ratio = lat.h / h
        if abs(ratio - round(ratio)) < 1e-12:
            r = int(round(ratio))
            atoms = {int(k) * r: m for k, m in zip(lat.indices, lat.masses) if m > 0}
            return LatticeDist.from_atoms(atoms, h), 0.0
    sf = np.vectorize(step.sf, otypes=[float])
    if lo is None:
        if math.isfinite(step.lower_bound):
            lo = step.lower_bound
        else:
            lo = _search(lambda x: 1.0 - step.sf(x) <= leak_budget / 2, -h, -1)
    if hi is None:
        hi = _search(lambda x: step.sf(x) <= leak_budget / 2, max(h, lo + h), 1)
    k_lo, k_hi = int(math.floor(lo / h + 0.5)), int(math.ceil(hi / h))
    if k_hi - k_lo + 1 > max_points:
        raise ValueError(f"grid of {k_hi - k_lo + 1} points exceeds max_points={max_points}")
    edges = (np.arange(k_lo, k_hi + 2) - 0.5) * h
    s = sf(edges)
    masses = s[:-1] - s[1:]
    leak_lo, leak_hi = 1.0 - s[0], s[-1]
    masses[0] += leak_lo
    masses[-1] += leak_hi
    leak = leak_lo + leak_hi
    if leak > leak_budget:
        raise ValueError(f"leaked mass {leak:.3e} exceeds budget {leak_budget:.3e}")
    masses = np.clip(masses, 0.0, None)
    return LatticeDist(h, k_lo, masses / masses.sum()), leak


def _search(ok, start: float, direction: int) -> float:
    x = start
    for _ in range(200):
        if ok(x):
            return x
        x *= 2.0
    raise ValueError("range search did not terminate")


@dataclass(frozen=True, eq=False)
class GridTail(TailModel):
    """Smooth interpolant of a binned step's tail on the grid.

    A step binned by :func:`discretize` has ``P{X > k h} = Fbar(k h + h/2)``
    up to the top grid point and nothing beyond, so the interpolant is the
    original tail shifted by ``h/2`` with its integrated tail cut at ``top``.
    """

    base: TailModel
    shift: float
    top: float
    name: str = "grid"

    @property
    def alpha(self):
        return self.base.alpha

    @property
    def x_min(self):
        return self.base.x_min - self.shift

    @property
    def k_max(self):
        return self.base.k_max

    def _tail(self, x):
        x = np.asarray(x, float)
        return np.where(x < self.top, self.base.tail(x + self.shift), 0.0)[()]

    def _dtail(self, k, x):
        x = np.asarray(x, float)
        return np.where(x < self.top, self.base.dtail(k, x + self.shift), 0.0)[()]

    def _itail(self, x):
        x = np.minimum(np.asarray(x, float), self.top)
        return (self.base.itail(x + self.shift) - self.base.itail(self.top + self.shift))[()]


def grid_tail_model(step: StepDistribution, lat: LatticeDist) -> GridTail:
    """:class:`GridTail` for ``lat = discretize(step, h)``."""
    return GridTail(step.upper_tail, lat.h / 2.0, lat.hi * lat.h)
