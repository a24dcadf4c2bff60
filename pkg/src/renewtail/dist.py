"""Step distributions of a two-sided random walk.

Every law exposes the same small surface: window masses ``P(a < X <= b)``,
the Laplace transform ``g(theta) = E exp(-theta X)`` and its derivative as
extended reals, the arithmetic span, and sampling from a numpy ``Generator``.

Lattice laws live on ``d * Z`` and are described by integer atom indices.
Internally everything reduces to one primitive per law:

* lattice: ``_wsum(theta, k1, k2, power)`` =
  ``sum_{k1 <= k <= k2} (d k)**power * exp(-theta d k) * P(X = d k)``
* continuous: ``_wint(theta, a, b, power, closed)`` =
  ``E[X**power exp(-theta X); X in (a, b]]`` (``closed="left"`` for ``[a, b)``)

Both return a float that may be ``+-inf`` when the defining sum diverges.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Callable, Optional

import mpmath as mp
import numpy as np

from .errors import ConfigError, NoBracketError
from .extreal import INF, ExtendedReal

MASS_TOL = 1e-12
# table samplers stop once the untabulated tail is below double resolution
_SAMPLER_TAIL = 2.0 ** -62
_SAMPLER_MAX_LEN = 2 ** 21
_DENSE_SUM_MAX = 200_000


def _floor_index(v: float) -> int:
    """floor() that snaps values within 1e-9 of an integer onto it."""
    r = round(v)
    if abs(v - r) <= 1e-9 * max(1.0, abs(v)):
        return int(r)
    return math.floor(v)


def _lattice_range(a: float, b: float, d: float) -> tuple[float, float]:
    """Integer index range of lattice points ``d k`` in ``(a, b]``."""
    k1 = -math.inf if a == -math.inf else _floor_index(a / d) + 1
    k2 = math.inf if b == math.inf else _floor_index(b / d)
    return k1, k2


def _lattice_range_closed_left(a: float, b: float, d: float) -> tuple[float, float]:
    """Integer index range of lattice points ``d k`` in ``[a, b)``."""
    k1 = -math.inf if a == -math.inf else -_floor_index(-a / d)
    k2 = math.inf if b == math.inf else -_floor_index(-b / d) - 1
    return k1, k2


class StepDistribution(ABC):
    """Law of a single increment ``X``."""

    family: str = "abstract"
    lattice: bool = False
    d: Optional[float] = None

    # -- primitives ---------------------------------------------------------
    @abstractmethod
    def _sum(self, theta: float, a: float, b: float, power: int = 0, closed: str = "right") -> float:
        """``E[X**power exp(-theta X); X in window]`` as a float (may be inf)."""

    @property
    @abstractmethod
    def theta_fin(self) -> float:
        """Finiteness abscissa ``sup{theta: g(theta) < inf}`` (may be inf)."""

    @property
    def right_abscissa(self) -> float:
        """``sup{s >= 0: E exp(s X) < inf}``; governs tilting in the other direction."""
        return math.inf

    @abstractmethod
    def sample(self, rng: np.random.Generator, size=None):
        ...

    # -- derived ------------------------------------------------------------
    def mass(self, a: float, b: float) -> float:
        """``P(a < X <= b)``."""
        if not a < b:
            return 0.0
        return max(self._sum(0.0, a, b), 0.0)

    def survival(self, t: float) -> float:
        return self.mass(t, math.inf)

    def cdf(self, t: float) -> float:
        return self.mass(-math.inf, t)

    def prob_negative(self) -> float:
        return self._sum(0.0, -math.inf, 0.0, closed="left")

    def laplace(self, theta: float) -> ExtendedReal:
        v = self._sum(theta, -math.inf, math.inf)
        return INF if v == math.inf else ExtendedReal(v)

    def laplace_deriv(self, theta: float) -> ExtendedReal:
        if self.laplace(theta).inf:
            raise ValueError(f"g({theta!r}) is infinite; derivative undefined")
        v = -self._sum(theta, -math.inf, math.inf, power=1)
        if v == -math.inf or math.isnan(v):
            raise ValueError(f"g'({theta!r}) diverges to -inf")
        return INF if v == math.inf else ExtendedReal(v)

    def mean(self) -> ExtendedReal:
        v = self._sum(0.0, -math.inf, math.inf, power=1)
        if v == -math.inf or math.isnan(v):
            raise ValueError("mean is -inf or undefined")
        return INF if v == math.inf else ExtendedReal(v)

    def total_mass(self) -> float:
        return self._sum(0.0, -math.inf, math.inf)

    def _validate(self):
        tm = self.total_mass()
        if abs(tm - 1.0) > MASS_TOL:
            raise ConfigError(f"{self.family}: total mass {tm!r} differs from 1 by more than {MASS_TOL}")
        if not self.prob_negative() > 0:
            raise ConfigError(f"{self.family}: P(X < 0) must be positive")
        m = self.mean()
        if not m > 0:
            raise ConfigError(f"{self.family}: mean {m} must be positive")


class LatticeDistribution(StepDistribution):
    lattice = True

    @abstractmethod
    def _wsum(self, theta: float, k1: float, k2: float, power: int = 0) -> float:
        ...

    @abstractmethod
    def tilted_pmf(self, theta: float, ks: np.ndarray) -> np.ndarray:
        """``exp(-theta d k) P(X = d k)`` for integer indices ``ks``."""

    @property
    @abstractmethod
    def k_support(self) -> tuple[float, float]:
        ...

    @abstractmethod
    def support_indices(self) -> list[int]:
        """Enough support indices to determine the gcd of the support."""

    def pmf(self, ks) -> np.ndarray:
        return self.tilted_pmf(0.0, np.asarray(ks, dtype=np.int64))

    def _sum(self, theta, a, b, power=0, closed="right"):
        if closed == "right":
            k1, k2 = _lattice_range(a, b, self.d)
        else:
            k1, k2 = _lattice_range_closed_left(a, b, self.d)
        if k1 > k2:
            return 0.0
        return self._wsum(theta, k1, k2, power)

    def span(self) -> float:
        g = reduce(math.gcd, (abs(k) for k in self.support_indices()), 0)
        if g == 0:
            raise ConfigError("lattice law concentrated at 0 has no span")
        return self.d * g

    # -- sampling by table inversion with exact overflow handling ----------
    @cached_property
    def _sampler(self):
        lo, hi = self.k_support
        tail_l = tail_r = 0.0
        if lo == -math.inf:
            lo = -self._table_extent(-1)
            tail_l = self._wsum(0.0, -math.inf, lo - 1)
        if hi == math.inf:
            hi = self._table_extent(+1)
            tail_r = self._wsum(0.0, hi + 1, math.inf)
        ks = np.arange(int(lo), int(hi) + 1, dtype=np.int64)
        ps = self.tilted_pmf(0.0, ks)
        cum = np.cumsum(ps)
        return ks, cum, tail_l, tail_r

    def _table_extent(self, side: int) -> int:
        n = 64
        while n < _SAMPLER_MAX_LEN:
            t = self._wsum(0.0, n + 1, math.inf) if side > 0 else self._wsum(0.0, -math.inf, -n - 1)
            if t < _SAMPLER_TAIL:
                return n
            n *= 2
        return _SAMPLER_MAX_LEN

    def _invert_tail(self, r: float, start: int, side: int) -> int:
        # smallest j >= start with tail mass from j onwards <= r (right side),
        # mirrored for the left side
        def tail(j):
            return self._wsum(0.0, j, math.inf) if side > 0 else self._wsum(0.0, -math.inf, -j)

        lo, hi = start, start
        while tail(hi + 1) > r:
            lo, hi = hi, 2 * hi + 1
        while lo < hi:
            mid = (lo + hi) // 2
            if tail(mid + 1) > r:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def sample(self, rng, size=None):
        ks, cum, tail_l, tail_r = self._sampler
        n = 1 if size is None else int(np.prod(size))
        total = tail_l + cum[-1] + tail_r
        u = rng.random(n) * total
        out = np.empty(n, dtype=np.int64)
        in_table = (u >= tail_l) & (u < tail_l + cum[-1])
        idx = np.searchsorted(cum, u[in_table] - tail_l, side="right")
        out[in_table] = ks[np.minimum(idx, len(ks) - 1)]
        for i in np.flatnonzero(~in_table):
            if u[i] < tail_l:
                out[i] = -self._invert_tail(u[i], int(-ks[0]) + 1, -1)
            else:
                out[i] = self._invert_tail(total - u[i], int(ks[-1]) + 1, +1)
        vals = out.astype(float) * self.d
        return float(vals[0]) if size is None else vals.reshape(size)


def _atoms_tuple(atoms) -> tuple[tuple[int, float], ...]:
    items = atoms.items() if isinstance(atoms, dict) else atoms
    merged: dict[int, float] = {}
    for k, p in items:
        if int(k) != k:
            raise ConfigError(f"atom index {k!r} is not an integer")
        merged[int(k)] = merged.get(int(k), 0.0) + float(p)
    for k, p in merged.items():
        if not p >= 0 or not math.isfinite(p):
            raise ConfigError(f"atom {k} has invalid probability {p!r}")
    return tuple(sorted(merged.items()))


def _atom_wsum(atoms, d, theta, k1, k2, power) -> float:
    terms = []
    for k, p in atoms:
        if k1 <= k <= k2 and p > 0:
            x = d * k
            e = -theta * x
            if e > 700:
                return math.inf if power == 0 or x > 0 else -math.inf
            terms.append(x ** power * math.exp(e) * p)
    return math.fsum(terms)


def _atom_pmf(atoms, d, theta, ks: np.ndarray) -> np.ndarray:
    out = np.zeros(ks.shape, dtype=float)
    for k, p in atoms:
        with np.errstate(over="ignore"):
            out[ks == k] += p * math.exp(min(-theta * d * k, 709.0))
    return out


@dataclass(frozen=True)
class LatticePmf(LatticeDistribution):
    """Finitely many atoms: ``P(X = d k) = p_k``."""

    atoms: tuple = ()
    d: float = 1.0
    family: str = field(default="LatticePmf", init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "atoms", _atoms_tuple(self.atoms))
        if not self.d > 0:
            raise ConfigError("span unit d must be positive")
        if not self.atoms:
            raise ConfigError("LatticePmf needs at least one atom")
        self._validate()

    @property
    def theta_fin(self):
        return math.inf

    @property
    def k_support(self):
        ks = [k for k, p in self.atoms if p > 0]
        return float(min(ks)), float(max(ks))

    def support_indices(self):
        return [k for k, p in self.atoms if p > 0]

    def _wsum(self, theta, k1, k2, power=0):
        return _atom_wsum(self.atoms, self.d, theta, k1, k2, power)

    def tilted_pmf(self, theta, ks):
        return _atom_pmf(self.atoms, self.d, theta, np.asarray(ks))


def _power_series(s: float, logz: float, j1: float, j2: float) -> float:
    """``sum_{j1 <= j <= j2} j**(-s) z**j`` for integers ``1 <= j1``, ``z = exp(logz) <= 1``."""
    if j1 > j2:
        return 0.0
    if j2 != math.inf and j2 - j1 < _DENSE_SUM_MAX:
        j = np.arange(int(j1), int(j2) + 1, dtype=float)
        return math.fsum(np.exp(-s * np.log(j) + logz * j))
    with mp.workdps(30):
        z = mp.e ** mp.mpf(logz)

        def from_(j):
            return z ** j * mp.lerchphi(z, s, j)

        v = from_(int(j1))
        if j2 != math.inf:
            v -= from_(int(j2) + 1)
        return float(v)


@dataclass(frozen=True)
class PolyGeomLattice(LatticeDistribution):
    """Left tail ``P(X = -d k) = C k**-beta a**-k`` (k >= 1) plus finite atoms at ``k >= 0``."""

    C: float = 0.5
    beta: float = 4.0
    a: float = 2.0
    atoms: tuple = ()
    d: float = 1.0
    family: str = field(default="PolyGeomLattice", init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "atoms", _atoms_tuple(self.atoms))
        if not (self.C > 0 and self.beta > 1 and self.a > 1 and self.d > 0):
            raise ConfigError("PolyGeomLattice needs C > 0, beta > 1, a > 1, d > 0")
        if any(k < 0 for k, _ in self.atoms):
            raise ConfigError("PolyGeomLattice atoms must sit at k >= 0")
        self._validate()

    @classmethod
    def with_residual(cls, C, beta, a, residual_k=1, d=1.0, atoms=()) -> "PolyGeomLattice":
        """Instance whose atom at ``residual_k`` absorbs the mass left over by the tail."""
        atoms = dict(_atoms_tuple(atoms))
        left = C * float(mp.polylog(beta, 1.0 / a))
        resid = 1.0 - left - sum(atoms.values())
        if resid < 0:
            raise ConfigError(f"left tail mass {left!r} exceeds available probability")
        atoms[residual_k] = atoms.get(residual_k, 0.0) + resid
        return cls(C=C, beta=beta, a=a, atoms=tuple(atoms.items()), d=d)

    @property
    def theta_fin(self):
        return math.log(self.a) / self.d

    @property
    def k_support(self):
        return -math.inf, float(max([k for k, p in self.atoms if p > 0] + [-1]))

    def support_indices(self):
        return [k for k, p in self.atoms if p > 0] + [1]

    def _logz(self, theta: float) -> float:
        lz = theta * self.d - math.log(self.a)
        # theta = log(a)/d round-trips only to rounding; snap onto the boundary
        return 0.0 if abs(lz) <= 4e-16 * max(1.0, math.log(self.a)) else lz

    def _wsum(self, theta, k1, k2, power=0):
        v = _atom_wsum(self.atoms, self.d, theta, k1, k2, power)
        j1, j2 = max(1.0, -k2), -k1
        if j1 > j2:
            return v
        lz = self._logz(theta)
        s = self.beta - power
        sign = (-self.d) ** power
        if j2 == math.inf and (lz > 0 or (lz == 0 and s <= 1)):
            return math.inf * sign
        return v + sign * self.C * _power_series(s, lz, j1, j2)

    def tilted_pmf(self, theta, ks):
        ks = np.asarray(ks)
        out = _atom_pmf(self.atoms, self.d, theta, ks)
        neg = ks < 0
        j = -ks[neg].astype(float)
        with np.errstate(over="ignore"):
            out[neg] += self.C * np.exp(-self.beta * np.log(j) + self._logz(theta) * j)
        return out


@dataclass(frozen=True)
class TwoSidedExponential(StepDistribution):
    """Density ``p lam e^{-lam x}`` on ``x > 0`` and ``(1-p) mu e^{mu x}`` on ``x < 0``."""

    p: float = 0.6
    lam: float = 1.0
    mu: float = 2.0
    family: str = field(default="TwoSidedExponential", init=False, repr=False)

    def __post_init__(self):
        if not (0 < self.p < 1 and self.lam > 0 and self.mu > 0):
            raise ConfigError("TwoSidedExponential needs 0 < p < 1, lam > 0, mu > 0")
        self._validate()

    @property
    def theta_fin(self):
        return self.mu

    @property
    def right_abscissa(self):
        return self.lam

    @staticmethod
    def _expint(r: float, u: float, v: float, power: int) -> float:
        """``int_u^v y**power e^{-r y} dy`` for ``0 <= u <= v <= inf``."""
        if u >= v:
            return 0.0
        if v == math.inf and r <= 0:
            return math.inf
        if r == 0:
            return v - u if power == 0 else (v * v - u * u) / 2

        def prim(y):  # -antiderivative, evaluated as e^{-r y}(...)
            if y == math.inf:
                return 0.0
            e = math.exp(-r * y)
            return e / r if power == 0 else (y + 1.0 / r) * e / r

        return prim(u) - prim(v)

    def _sum(self, theta, a, b, power=0, closed="right"):
        right = self.p * self.lam * self._expint(self.lam + theta, max(a, 0.0), max(b, 0.0), power)
        left = (1 - self.p) * self.mu * self._expint(self.mu - theta, max(-b, 0.0), max(-a, 0.0), power)
        if power == 1:
            left = -left
        if math.isinf(right) and math.isinf(left):
            return math.nan
        return right + left

    def sample(self, rng, size=None):
        n = 1 if size is None else size
        u = rng.random(n)
        e = rng.standard_exponential(n)
        x = np.where(u < self.p, e / self.lam, -e / self.mu)
        return float(x[0]) if size is None else x


def _gammainc_window(q: float, s: float, lo: float, hi: float) -> float:
    """``int_lo^hi t**q e^{-s t} dt`` for ``0 < lo <= hi <= inf``."""
    if lo >= hi:
        return 0.0
    if s == 0:
        if hi == math.inf:
            return math.inf if q >= -1 else lo ** (q + 1) / (-(q + 1))
        if q == -1:
            return math.log(hi / lo)
        return (hi ** (q + 1) - lo ** (q + 1)) / (q + 1)
    if s < 0:
        if hi == math.inf:
            return math.inf
        return float(mp.quad(lambda t: t ** q * mp.e ** (-s * t), [lo, hi]))
    with mp.workdps(30):
        upper = mp.inf if hi == math.inf else s * hi
        return float(mp.gammainc(q + 1, s * lo, upper) / mp.mpf(s) ** (q + 1))


@dataclass(frozen=True)
class RegVarExpLeft(StepDistribution):
    """``P(-X > t) = (alpha/kappa0) c t**-(alpha+1) e^{-kappa0 t}`` for ``t >= t0``, plus an atom at ``b > 0``.

    At ``theta = kappa0`` the tilted left tail is ``c t**-alpha + O(t**-(alpha+1))``,
    i.e. regularly varying with index ``alpha`` and constant slowly varying factor ``c``.
    """

    alpha: float = 0.75
    c: float = 1.0
    kappa0: float = 1.0
    t0: float = 1.0
    b: float = 1.0
    family: str = field(default="RegVarExpLeft", init=False, repr=False)

    def __post_init__(self):
        if not (0 < self.alpha < 1 and self.c > 0 and self.kappa0 > 0 and self.t0 > 0 and self.b > 0):
            raise ConfigError("RegVarExpLeft needs 0 < alpha < 1 and c, kappa0, t0, b > 0")
        if not 0 < self.tail_mass < 1:
            raise ConfigError(f"left tail mass {self.tail_mass!r} must lie in (0, 1)")
        self._validate()

    @property
    def amplitude(self) -> float:
        return self.alpha / self.kappa0 * self.c

    @property
    def tail_mass(self) -> float:
        return self.amplitude * self.t0 ** -(self.alpha + 1) * math.exp(-self.kappa0 * self.t0)

    @property
    def atom_mass(self) -> float:
        return 1.0 - self.tail_mass

    @property
    def theta_fin(self):
        return self.kappa0

    def _sum(self, theta, a, b, power=0, closed="right"):
        atom_in = (a < self.b <= b) if closed == "right" else (a <= self.b < b)
        v = self.b ** power * math.exp(-theta * self.b) * self.atom_mass if atom_in else 0.0
        lo, hi = max(self.t0, -b), -a
        if lo >= hi:
            return v
        s = self.kappa0 - theta
        al = self.alpha
        i1 = _gammainc_window(power - al - 1, s, lo, hi)
        i2 = _gammainc_window(power - al - 2, s, lo, hi)
        tail = self.amplitude * (self.kappa0 * i1 + (al + 1) * i2)
        return v + (-1) ** power * tail

    def _left_quantile(self, v: np.ndarray) -> np.ndarray:
        # solve (alpha+1) ln t + kappa0 t = target; Newton from t0 is monotone
        al1, k0 = self.alpha + 1, self.kappa0
        target = al1 * math.log(self.t0) + k0 * self.t0 - np.log(v)
        t = np.full_like(target, self.t0)
        for _ in range(200):
            h = al1 * np.log(t) + k0 * t - target
            step = h / (al1 / t + k0)
            t = t - step
            if np.all(np.abs(step) <= 1e-15 * t):
                break
        return t

    def sample(self, rng, size=None):
        n = 1 if size is None else size
        u = rng.random(n)
        v = 1.0 - rng.random(n)
        x = np.full(n, self.b, dtype=float)
        left = u >= self.atom_mass
        x[left] = -self._left_quantile(v[left])
        return float(x[0]) if size is None else x


class _TiltMixin:
    """Law of ``-X`` under the exponential change of measure ``rho^{-1} e^{-kappa X}``.

    ``Q(Y in B) = rho^{-1} E[exp(-kappa X); -X in B]``.
    """

    family = "Tilted"

    def __init__(self, base: StepDistribution, kappa: float, rho: float):
        self.base = base
        self.kappa = float(kappa)
        self.rho = float(rho)
        self.d = base.d
        self._validate()

    def __repr__(self):
        return f"{type(self).__name__}({self.base!r}, kappa={self.kappa!r}, rho={self.rho!r})"

    def __eq__(self, other):
        return (type(other) is type(self) and self.base == other.base
                and self.kappa == other.kappa and self.rho == other.rho)

    def __hash__(self):
        return hash((self.base, self.kappa, self.rho))

    @property
    def theta_fin(self):
        return self.kappa + self.base.right_abscissa

    @property
    def right_abscissa(self):
        return self.base.theta_fin - self.kappa

    def _sum(self, theta, a, b, power=0, closed="right"):
        flip = "left" if closed == "right" else "right"
        v = self.base._sum(self.kappa - theta, -b, -a, power, closed=flip)
        return (-1) ** power * v / self.rho


class TiltedLattice(_TiltMixin, LatticeDistribution):
    def _wsum(self, theta, k1, k2, power=0):
        return (-1) ** power * self.base._wsum(self.kappa - theta, -k2, -k1, power) / self.rho

    def tilted_pmf(self, theta, ks):
        return self.base.tilted_pmf(self.kappa - theta, -np.asarray(ks)) / self.rho

    @property
    def k_support(self):
        lo, hi = self.base.k_support
        return -hi, -lo

    def support_indices(self):
        return [-k for k in self.base.support_indices()]


class TiltedContinuous(_TiltMixin, StepDistribution):
    def sample(self, rng, size=None):
        # generic inversion of the tilted cdf; slow, meant for modest draw counts
        from scipy.optimize import brentq

        n = 1 if size is None else int(np.prod(size))
        u = rng.random(n)
        out = np.empty(n)
        for i, ui in enumerate(u):
            lo, hi = -1.0, 1.0
            while self.cdf(lo) > ui:
                lo *= 2
            while self.cdf(hi) < ui:
                hi *= 2
            out[i] = brentq(lambda t: self.cdf(t) - ui, lo, hi, xtol=1e-12)
        return float(out[0]) if size is None else out.reshape(size)


def tilted(base: StepDistribution, kappa: float, rho: float) -> StepDistribution:
    """Generic tilted law of ``-X``; lattice bases stay lattice."""
    cls = TiltedLattice if base.lattice else TiltedContinuous
    return cls(base, kappa, rho)


# -- module-level operations ------------------------------------------------

def mass_in_window(dist: StepDistribution, a: float, b: float) -> float:
    """``P(a < X <= b)``; empty windows give 0."""
    return dist.mass(a, b)


def laplace(dist: StepDistribution, theta: float) -> ExtendedReal:
    """``g(theta) = E exp(-theta X)``, ``+inf`` exactly when the expectation diverges."""
    return dist.laplace(theta)


def laplace_deriv(dist: StepDistribution, theta: float) -> ExtendedReal:
    """``g'(theta) = E[-X exp(-theta X)]``; ``+inf`` for an infinite tilted mean."""
    return dist.laplace_deriv(theta)


def detect_span(dist: StepDistribution) -> Optional[float]:
    """Maximal ``d`` with the law concentrated on ``d Z``; None for non-arithmetic laws."""
    if not dist.lattice:
        return None
    return dist.span()


def sample(dist: StepDistribution, rng: np.random.Generator, size=None):
    return dist.sample(rng, size)


# -- calibration ------------------------------------------------------------

@dataclass(frozen=True)
class FamilyTemplate:
    """A family with one free scalar parameter scanned over ``[lo, hi]``."""

    build: Callable[[float], StepDistribution]
    lo: float
    hi: float
    name: str = "param"
    scan_points: int = 257


def polygeom_template(beta: float, a: float = 2.0, d: float = 1.0, residual_k: int = 1,
                      c_max: Optional[float] = None) -> FamilyTemplate:
    """PolyGeomLattice with free ``C`` and a residual atom at ``residual_k``."""
    hi = 1.0 / float(mp.polylog(beta, 1.0 / a))
    if c_max is not None:
        hi = min(hi, c_max)
    return FamilyTemplate(
        build=lambda C: PolyGeomLattice.with_residual(C, beta, a, residual_k=residual_k, d=d),
        lo=0.0, hi=hi, name="C")


def regvar_template(alpha: float, kappa0: float, t0: float, b: float) -> FamilyTemplate:
    """RegVarExpLeft with free ``c``; the atom at ``b`` takes the remaining mass."""
    unit = alpha / kappa0 * t0 ** -(alpha + 1) * math.exp(-kappa0 * t0)
    return FamilyTemplate(
        build=lambda c: RegVarExpLeft(alpha=alpha, c=c, kappa0=kappa0, t0=t0, b=b),
        lo=0.0, hi=1.0 / unit, name="c")


def calibrate_boundary(template: FamilyTemplate, theta: float, target: float = 1.0,
                       tol: float = 1e-13) -> StepDistribution:
    """Find the family member with ``g(theta) = target`` within ``tol``.

    The parameter range is scanned on an even grid (inadmissible members are
    skipped); the first sign change of ``g(theta) - target`` is bisected.
    """

    def f(p):
        try:
            dist = template.build(float(p))
        except ConfigError:
            return None, None
        return float(dist.laplace(theta)) - target, dist

    grid = np.linspace(template.lo, template.hi, template.scan_points)
    prev = None
    bracket = None
    for p in grid:
        v, dist = f(p)
        if v is None:
            continue
        if v == 0:
            return dist
        if prev is not None and (prev[1] < 0) != (v < 0):
            bracket = (prev[0], p, prev[1] < 0)
            break
        prev = (p, v)
    if bracket is None:
        raise NoBracketError(
            f"g({theta!r}) - {target!r} has no sign change for {template.name} in "
            f"[{template.lo!r}, {template.hi!r}] ({template.scan_points} scan points)")
    lo, hi, lo_neg = bracket
    best = None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        v, dist = f(mid)
        if v is None:
            raise NoBracketError(f"inadmissible {template.name}={mid!r} inside bracket")
        if best is None or abs(v) < abs(best[0]):
            best = (v, dist)
        if abs(v) <= tol or mid in (lo, hi):
            break
        if (v < 0) == lo_neg:
            lo = mid
        else:
            hi = mid
    if abs(best[0]) > tol:
        raise NoBracketError(f"bisection stalled at |g - target| = {abs(best[0])!r} > {tol!r}")
    return best[1]
