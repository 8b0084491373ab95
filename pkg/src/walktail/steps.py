"""Step distributions of the random walk and finite lattice laws."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .streams import next_uniform, substream_key
from .tails import AtomTail, TailModel, _split_spec, make_pareto

# sampler kinds understood by the compiled kernels
KIND_NET_LOSS = 0  # X = A - c*T - shift
KIND_ATOMS = 1

CLAIM_PARETO, CLAIM_BURR, CLAIM_NONE = 0, 1, 2
INTER_NONE, INTER_EXP, INTER_DET = 0, 1, 2

TAG_PATH = 1


@nb.njit(nogil=True, cache=True)
def draw(kind, params, cdf, vals, state):
    if kind == KIND_ATOMS:
        u = next_uniform(state)
        i = np.searchsorted(cdf, u, side="right")
        if i >= vals.shape[0]:
            i = vals.shape[0] - 1
        return vals[i]
    claim = int(params[0])
    a = 0.0
    if claim == CLAIM_PARETO:
        a = params[2] * math.exp(-math.log(next_uniform(state)) / params[1])
    elif claim == CLAIM_BURR:
        # Fbar(a) = (1 + (a/s)^c)^-k
        a = params[3] * (next_uniform(state) ** (-1.0 / params[2]) - 1.0) ** (1.0 / params[1])
    inter = int(params[4])
    t = 0.0
    if inter == INTER_EXP:
        t = -math.log(next_uniform(state)) / params[5]
    elif inter == INTER_DET:
        t = params[5]
    return a - params[6] * t - params[7]


@nb.njit(nogil=True, cache=True)
def draw_many(kind, params, cdf, vals, key, n):
    state = np.empty(1, np.uint64)
    state[0] = key
    out = np.empty(n)
    for i in range(n):
        out[i] = draw(kind, params, cdf, vals, state)
    return out


@dataclass(frozen=True, eq=False)
class LatticeDist:
    """Masses on consecutive grid points ``(offset + i) * h``; may be defective."""

    h: float
    offset: int
    masses: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1:
            raise ValueError("masses must be one-dimensional")
        if np.any(m < 0):
            raise ValueError("masses must be nonnegative")
        if m.sum() > 1 + 1e-12:
            raise ValueError(f"total mass {m.sum()} exceeds 1")
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "offset", int(self.offset))

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + len(self.masses))

    @property
    def points(self) -> np.ndarray:
        return self.indices * self.h

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + len(self.masses) - 1

    def moment(self, k: int) -> float:
        return float(np.sum(self.masses * self.points**k))

    def mean(self) -> float:
        return self.moment(1)

    def mass_at(self, index: int) -> float:
        i = index - self.offset
        return float(self.masses[i]) if 0 <= i < len(self.masses) else 0.0

    def tail_index(self, index: int) -> float:
        """``P{X > index * h}``."""
        i = index - self.offset + 1
        return float(self.masses[max(i, 0):].sum()) if i < len(self.masses) else 0.0

    def dense(self, lo: int, hi: int) -> np.ndarray:
        """Masses on indices ``lo..hi`` (zero-padded or cropped)."""
        out = np.zeros(hi - lo + 1)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo : b - lo + 1] = self.masses[a - self.offset : b - self.offset + 1]
        return out

    def trimmed(self) -> "LatticeDist":
        nz = np.flatnonzero(self.masses)
        if len(nz) == 0:
            return LatticeDist(self.h, 0, np.zeros(1))
        return LatticeDist(self.h, self.offset + nz[0], self.masses[nz[0] : nz[-1] + 1])

    def convolve(self, other: "LatticeDist") -> "LatticeDist":
        if not math.isclose(self.h, other.h):
            raise ValueError("grid steps differ")
        return LatticeDist(self.h, self.offset + other.offset, np.convolve(self.masses, other.masses))

    def to_dict(self) -> dict:
        return {"h": self.h, "offset": self.offset, "masses": self.masses.tolist()}

    @classmethod
    def from_atoms(cls, atoms: dict, h: float = 1.0) -> "LatticeDist":
        """Build from ``{grid_index: mass}``."""
        lo, hi = min(atoms), max(atoms)
        m = np.zeros(hi - lo + 1)
        for k, v in atoms.items():
            m[k - lo] += v
        return cls(h, lo, m)


@dataclass(frozen=True, eq=False)
class StepDistribution:
    kind: int
    params: np.ndarray
    mean: float
    upper_tail: TailModel
    kappa: float
    description: str
    lattice: LatticeDist | None = None
    lower_bound: float = -math.inf
    cdf_table: np.ndarray = field(default_factory=lambda: np.zeros(1))
    val_table: np.ndarray = field(default_factory=lambda: np.zeros(1))
    full_sf: object = None  # P{X > x} on the whole line when upper_tail only covers [x_min, inf)

    def __post_init__(self):
        if not self.mean < 0:
            raise ValueError(f"step mean must be negative, got {self.mean}")
        if not self.kappa > 1:
            raise ValueError(f"lower-tail moment index must exceed 1, got {self.kappa}")

    @property
    def alpha(self) -> float:
        return self.upper_tail.alpha

    def sample(self, n: int, seed: int = 0, stream: int = 0) -> np.ndarray:
        key = substream_key(seed, TAG_PATH, stream)
        return draw_many(self.kind, self.params, self.cdf_table, self.val_table, key, int(n))

    def kernel_args(self):
        return self.kind, self.params, self.cdf_table, self.val_table

    def sf(self, x: float) -> float:
        """``P{X > x}``."""
        if self.lattice is not None:
            return self.lattice.tail_index(math.floor(x / self.lattice.h + 1e-9))
        if self.full_sf is not None:
            return float(self.full_sf(x))
        if x < self.lower_bound:
            return 1.0
        return float(self.upper_tail.tail(max(x, self.upper_tail.x_min)))

    def cdf(self, x: float) -> float:
        return 1.0 - self.sf(x)


def _net_loss_params(claim_kind, claim_params, inter_kind, inter_param, premium, shift):
    p = np.zeros(8)
    p[0] = claim_kind
    p[1 : 1 + len(claim_params)] = claim_params
    p[4] = inter_kind
    p[5] = inter_param
    p[6] = premium
    p[7] = shift
    return p


def make_pareto_shift(alpha: float, scale: float, shift: float) -> StepDistribution:
    """``X = A - shift`` with ``A`` Pareto(alpha, scale)."""
    tail = make_pareto(alpha, scale, loc=shift)
    mean = scale * alpha / (alpha - 1.0) - shift
    if not mean < 0:
        raise ValueError(f"paretoshift mean {mean} is not negative")
    params = _net_loss_params(CLAIM_PARETO, [alpha, scale], INTER_NONE, 0.0, 0.0, shift)
    return StepDistribution(
        KIND_NET_LOSS,
        params,
        mean,
        tail,
        math.inf,
        f"paretoshift:alpha={alpha:g},scale={scale:g},shift={shift:g}",
        lower_bound=scale - shift,
    )


def make_lattice_step(lat: LatticeDist, description: str = "lattice") -> StepDistribution:
    if abs(lat.total - 1.0) > 1e-12:
        raise ValueError(f"lattice step must be proper, total={lat.total}")
    lat = lat.trimmed()
    keep = lat.masses > 0
    pts, ms = lat.points[keep], lat.masses[keep]
    cdf = np.cumsum(ms)
    cdf /= cdf[-1]
    return StepDistribution(
        KIND_ATOMS,
        np.zeros(8),
        lat.mean(),
        AtomTail(tuple(pts.tolist()), tuple(ms.tolist())),
        math.inf,
        description,
        lattice=lat,
        lower_bound=float(pts[0]),
        cdf_table=cdf,
        val_table=pts.astype(float),
    )


def make_two_point(q: float, up: float = 1.0, down: float = 1.0) -> StepDistribution:
    """``P{X = up} = q``, ``P{X = -down} = 1 - q``; light tailed, for oracle tests."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    if not q * up - (1 - q) * down < 0:
        raise ValueError("two-point step must have negative mean")
    h = math.gcd(_as_int(up), _as_int(down)) if _is_int(up) and _is_int(down) else None
    desc = f"twopoint:q={q:g},up={up:g},down={down:g}"
    if h is None:
        return StepDistribution(
            KIND_ATOMS, np.zeros(8), q * up - (1 - q) * down, AtomTail((-down, up), (1 - q, q)), math.inf, desc,
            lower_bound=-down, cdf_table=np.array([1 - q, 1.0]), val_table=np.array([-down, up], float),
        )
    lat = LatticeDist.from_atoms({-_as_int(down) // h: 1 - q, _as_int(up) // h: q}, h=float(h))
    return make_lattice_step(lat, desc)


def make_constant(c: float) -> StepDistribution:
    """Degenerate step ``X = -c``."""
    if not c > 0:
        raise ValueError("constant step needs c > 0")
    if _is_int(c):
        return make_lattice_step(LatticeDist(1.0, -_as_int(c), np.ones(1)), f"const:c={c:g}")
    return StepDistribution(
        KIND_ATOMS, np.zeros(8), -c, AtomTail((-c,), (1.0,)), math.inf, f"const:c={c:g}",
        lower_bound=-c, cdf_table=np.ones(1), val_table=np.array([-float(c)]),
    )


def _is_int(x) -> bool:
    return float(x).is_integer()


def _as_int(x) -> int:
    return int(round(float(x)))


def parse_step_spec(spec: str) -> StepDistribution:
    """``paretoshift:alpha=3,scale=1,shift=3``, ``twopoint:q=0.25,up=1,down=1`` or ``const:c=1``."""
    family, params = _split_spec(spec)
    builders = {"paretoshift": make_pareto_shift, "twopoint": make_two_point, "const": make_constant}
    if family not in builders:
        raise ValueError(f"unknown step family {family!r}")
    try:
        return builders[family](**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters in {spec!r}: {exc}") from exc


def sample_path(step: StepDistribution, n: int, seed: int = 0, stream: int = 0) -> np.ndarray:
    """Partial sums ``S_1..S_n``; identical for identical ``(seed, stream)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.cumsum(step.sample(n, seed, stream))
