"""Smoothly varying tail functions with analytic derivatives and integrated tails."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

K_MAX_ANALYTIC = 12


class DomainError(ValueError):
    """Evaluation point below the model's validity domain."""


class TailModel:
    """Upper tail ``Fbar`` of a distribution.

    Subclasses provide ``_tail``, ``_dtail`` (k >= 1) and ``_itail``; the
    public methods check the domain first.  ``itail`` is reported positive,
    so ``D^{-1} Fbar = -itail``.
    """

    alpha: float = math.inf
    x_min: float = -math.inf
    k_max: int = 0
    name: str = "tail"

    def check_domain(self, x):
        if np.any(np.asarray(x) < self.x_min):
            raise DomainError(f"{self.name}: x={x} below domain start {self.x_min}")

    def tail(self, x):
        self.check_domain(x)
        return self._tail(x)

    def dtail(self, k: int, x):
        if k == 0:
            return self.tail(x)
        if k > self.k_max:
            raise ValueError(f"{self.name}: derivative order {k} exceeds k_max={self.k_max}")
        self.check_domain(x)
        return self._dtail(k, x)

    def itail(self, x):
        self.check_domain(x)
        return self._itail(x)

    def __call__(self, x):
        return self.tail(x)


def _gbinom(a: float, j: int) -> float:
    """Generalized binomial coefficient ``a choose j``."""
    return _falling(a, j) / math.factorial(j)


def _falling(a: float, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= a - j
    return out


@dataclass(frozen=True)
class ParetoTail(TailModel):
    """``Fbar(x) = ((x + loc) / scale)^-alpha`` for ``x >= scale - loc``."""

    alpha: float
    scale: float = 1.0
    loc: float = 0.0
    k_max: int = K_MAX_ANALYTIC
    name: str = "pareto"

    @property
    def x_min(self):
        return self.scale - self.loc

    def _tail(self, x):
        return ((np.asarray(x, float) + self.loc) / self.scale) ** (-self.alpha)

    def _dtail(self, k, x):
        y = np.asarray(x, float) + self.loc
        return _falling(-self.alpha, k) * self.scale**self.alpha * y ** (-self.alpha - k)

    def _itail(self, x):
        y = (np.asarray(x, float) + self.loc) / self.scale
        return self.scale * y ** (1.0 - self.alpha) / (self.alpha - 1.0)


def make_pareto(alpha: float, scale: float = 1.0, loc: float = 0.0) -> ParetoTail:
    if not alpha > 1 or not scale > 0:
        raise ValueError(f"pareto needs alpha > 1 and scale > 0, got alpha={alpha}, scale={scale}")
    return ParetoTail(float(alpha), float(scale), float(loc))


def _burr_derivative_terms(c: float, k: float, n: int):
    """Terms ``(coef, e, b)`` with ``d^n/dy^n (1+y^c)^-k = sum coef * y^e * v^b``, ``v = 1/(1+y^c)``."""
    terms = {(0, k): 1.0}
    for _ in range(n):
        nxt: dict = {}
        for (e, b), coef in terms.items():
            for key, val in (((e - 1, b), coef * (e - b * c)), ((e - 1, b + 1), coef * b * c)):
                nxt[key] = nxt.get(key, 0.0) + val
        terms = {key: v for key, v in nxt.items() if v != 0.0}
    return [(coef, e, b) for (e, b), coef in terms.items()]


@dataclass(frozen=True)
class BurrTail(TailModel):
    """``Fbar(x) = (1 + ((x + loc)/scale)^c)^-k``; regularly varying with index ``-c*k``."""

    c: float
    k: float
    scale: float = 1.0
    loc: float = 0.0
    k_max: int = K_MAX_ANALYTIC
    name: str = "burr"
    _terms: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_terms", tuple(tuple(_burr_derivative_terms(self.c, self.k, n)) for n in range(self.k_max + 1))
        )

    @property
    def alpha(self):
        return self.c * self.k

    @property
    def x_min(self):
        return -self.loc

    def _y(self, x):
        return (np.asarray(x, float) + self.loc) / self.scale

    def _tail(self, x):
        return (1.0 + self._y(x) ** self.c) ** (-self.k)

    def _dtail(self, n, x):
        y = self._y(x)
        v = 1.0 / (1.0 + y**self.c)
        with np.errstate(divide="ignore", invalid="ignore"):
            total = sum(coef * y**e * v**b for coef, e, b in self._terms[n])
        return total / self.scale**n

    @property
    def series_cutoff(self) -> float:
        """``y`` beyond which the three-term tail series is accurate to 1e-12 relative."""
        lead = abs(_gbinom(-self.k, 3))
        u_c = max(2.0 * (self.k + 3.0), (lead / 1e-13) ** (1.0 / 3.0), 2.0)
        return u_c ** (1.0 / self.c)

    def _series_itail(self, y):
        total = 0.0
        for j in range(3):
            p = self.c * (self.k + j)
            total = total + _gbinom(-self.k, j) * y ** (1.0 - p) / (p - 1.0)
        return self.scale * total

    def _itail_scalar(self, x):
        y = float(self._y(x))
        yc = self.series_cutoff
        if y >= yc:
            return float(self._series_itail(y))
        head, _ = integrate.quad(
            lambda t: (1.0 + t**self.c) ** (-self.k), y, yc, epsabs=0.0, epsrel=1e-13, limit=400
        )
        return self.scale * head + float(self._series_itail(yc))

    def _itail(self, x):
        if np.ndim(x) == 0:
            return self._itail_scalar(x)
        return np.array([self._itail_scalar(v) for v in np.ravel(x)]).reshape(np.shape(x))


def make_burr(c: float, k: float, scale: float = 1.0, loc: float = 0.0) -> BurrTail:
    if not (c > 0 and k > 0 and scale > 0):
        raise ValueError("burr needs c, k, scale > 0")
    if not c * k > 1:
        raise ValueError(f"burr needs c*k > 1 for a finite integrated tail, got {c * k}")
    return BurrTail(float(c), float(k), float(scale), float(loc))


@dataclass(frozen=True)
class AtomTail(TailModel):
    """Tail of a finite atomic law; piecewise constant, no derivatives."""

    points: tuple
    masses: tuple
    name: str = "atoms"

    def _tail(self, x):
        pts, ms = np.asarray(self.points), np.asarray(self.masses)
        x = np.asarray(x, float)
        return np.sum(np.where(pts[None, :] > x.reshape(-1, 1), ms, 0.0), axis=1).reshape(x.shape)[()]

    def _itail(self, x):
        pts, ms = np.asarray(self.points), np.asarray(self.masses)
        x = np.asarray(x, float)
        gap = np.clip(pts[None, :] - x.reshape(-1, 1), 0.0, None)
        return np.sum(gap * ms, axis=1).reshape(x.shape)[()]


def parse_tail_spec(spec: str) -> TailModel:
    """Parse ``pareto:alpha=2.5,scale=1`` or ``burr:c=2,k=1.5,scale=1``."""
    family, params = _split_spec(spec)
    try:
        if family == "pareto":
            return make_pareto(**params)
        if family == "burr":
            return make_burr(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters in {spec!r}: {exc}") from exc
    raise ValueError(f"unknown tail family {family!r}")


def _split_spec(spec: str) -> tuple[str, dict]:
    family, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"malformed parameter {item!r} in {spec!r}")
        try:
            params[key.strip()] = float(val)
        except ValueError:
            raise ValueError(f"non-numeric value {val!r} in {spec!r}") from None
    return family.strip().lower(), params


def delta_r(h, t: float, x: float, r: float) -> float:
    """Fractional increment ``sign(x) (h(t(1-x)) - h(t)) / (|x|^r h(t))``."""
    return math.copysign(1.0, x) * (h(t * (1.0 - x)) - h(t)) / (abs(x) ** r * h(t))


def smoothness_diagnostic(model: TailModel, m: int, r: float, t_grid, delta_grid, n_x: int = 64) -> np.ndarray:
    """``sup_{0<|x|<=delta} |Delta^r_{t,x}(Fbar^(m))|`` for every (t, delta).

    Row ``i`` is ``t_grid[i]``, column ``j`` is ``delta_grid[j]``.  The sup is
    taken over a log-spaced grid of ``n_x`` magnitudes on each side of 0.
    """
    if m > model.k_max:
        raise ValueError(f"model has k_max={model.k_max} < m={m}")
    h = lambda s: model.dtail(m, s)  # noqa: E731
    out = np.empty((len(t_grid), len(delta_grid)))
    for i, t in enumerate(t_grid):
        for j, d in enumerate(delta_grid):
            if t * (1.0 - d) < model.x_min:
                raise DomainError(f"t={t}, delta={d} leaves the model domain")
            mags = np.geomspace(d * 1e-6, d, n_x)
            xs = np.concatenate([mags, -mags])
            out[i, j] = max(abs(delta_r(h, t, x, r)) for x in xs)
    return out


def deriv_check(model: TailModel, k: int, x: float, h_step: float = 1e-4) -> float:
    """Relative error of ``dtail(k, x)`` against a central difference of ``dtail(k-1, .)``."""
    f = lambda s: float(model.dtail(k - 1, s))  # noqa: E731
    fd = (f(x + h_step) - f(x - h_step)) / (2.0 * h_step)
    exact = float(model.dtail(k, x))
    scale = max(abs(exact), 1e-300)
    return abs(fd - exact) / scale
