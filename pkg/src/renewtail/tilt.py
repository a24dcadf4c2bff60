"""Cramér-type tilt parameters and the tilted step law.

``kappa = sup{theta > 0: g(theta) < 1}`` and ``rho = g(kappa)``.  Either ``g``
crosses 1 at an interior point (then ``rho = 1``) or ``kappa`` sits on the
finiteness abscissa with ``g(kappa) <= 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from scipy.optimize import brentq

from .dist import (
    LatticePmf,
    StepDistribution,
    TwoSidedExponential,
    detect_span,
    tilted,
)
from .errors import CertificationError, ConfigError
from .extreal import ExtendedReal

DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class TiltParams:
    kappa: float
    rho: float
    g_prime_kappa: ExtendedReal
    theta_fin: ExtendedReal
    span: Optional[float]
    boundary: bool = False
    # g(theta_fin) within 10*tol of 1: regimes (a) and (b) cannot be told apart
    ambiguous: bool = False

    @property
    def arithmetic(self) -> bool:
        return self.span is not None


def _g(dist: StepDistribution, theta: float) -> float:
    return float(dist.laplace(theta))


def exponent_sup(dist: StepDistribution, level: float = 1.0, tol: float = DEFAULT_TOL) -> tuple[float, bool]:
    """``sup{theta > 0: g(theta) <= level}`` for ``level >= 1`` (or ``< 1`` with ``g`` dipping below it).

    Returns ``(theta, on_boundary)``; ``on_boundary`` is True when the supremum
    is the finiteness abscissa rather than a crossing of ``level``.
    """
    fin = dist.theta_fin
    if math.isfinite(fin):
        g_fin = _g(dist, fin)
        if g_fin <= level:
            return fin, True
        hi = fin
    else:
        hi = 1.0
        while _g(dist, hi) <= level:
            hi *= 2.0
            if hi > 1e6:
                raise CertificationError("g(theta) stays below the level for theta up to 1e6")
    lo = hi / 2.0
    while not _g(dist, lo) <= level:
        lo /= 2.0
        if lo < 1e-300:
            raise CertificationError(f"no theta > 0 with g(theta) <= {level!r}")
    f = lambda t: min(_g(dist, t), 1e300) - level
    if f(lo) == 0.0:
        return lo, False
    root = brentq(f, lo, hi, xtol=tol * 1e-2, rtol=1e-15, maxiter=500)
    return root, False


def solve_tilt(dist: StepDistribution, tol: float = DEFAULT_TOL) -> TiltParams:
    """Solve for ``kappa``, ``rho``, ``g'(kappa)`` and the finiteness abscissa."""
    if not dist.prob_negative() > 0:
        raise ConfigError("tilt needs P(X < 0) > 0")
    mean = dist.mean()
    if not mean > 0:
        raise ConfigError(f"tilt needs E X > 0, got {mean}")
    fin = dist.theta_fin
    if fin <= 0:
        raise ConfigError("g(theta) is infinite for every theta > 0")

    ambiguous = False
    boundary = False
    if math.isfinite(fin):
        g_fin = _g(dist, fin)
        if abs(g_fin - 1.0) <= 10 * tol:
            ambiguous = True
            kappa, rho, boundary = fin, 1.0, True
        elif g_fin < 1.0:
            kappa, rho, boundary = fin, g_fin, True
    if not boundary:
        kappa, _ = exponent_sup(dist, 1.0, tol)
        rho = 1.0
    gp = dist.laplace_deriv(kappa)
    if not gp > 0:
        raise CertificationError(f"g'(kappa) = {gp} is not positive; kappa = {kappa!r} is not certified")
    return TiltParams(
        kappa=kappa,
        rho=rho,
        g_prime_kappa=gp,
        theta_fin=ExtendedReal.of(fin),
        span=detect_span(dist),
        boundary=boundary,
        ambiguous=ambiguous,
    )


def tilt_step_law(dist: StepDistribution, tp: TiltParams) -> StepDistribution:
    """Law of one step of the walk under the tilted measure ``Q``.

    Finite lattice laws and two-sided exponentials stay in their family; the
    tail families come back as a generic tilted law of ``-X``.
    """
    k, r = tp.kappa, tp.rho
    if isinstance(dist, LatticePmf):
        atoms = [(-j, math.exp(-k * dist.d * j) * p / r) for j, p in dist.atoms if p > 0]
        total = math.fsum(p for _, p in atoms)
        if abs(total - 1.0) > 1e-12:
            raise CertificationError(f"tilted masses sum to {total!r}; rho is inconsistent with the law")
        return LatticePmf(tuple((j, p / total) for j, p in atoms), d=dist.d)
    if isinstance(dist, TwoSidedExponential):
        p_right = (1 - dist.p) * dist.mu / ((dist.mu - k) * r)
        p_left = dist.p * dist.lam / ((dist.lam + k) * r)
        if abs(p_right + p_left - 1.0) > 1e-12:
            raise CertificationError("tilted two-sided exponential is not normalised")
        return TwoSidedExponential(p=p_right / (p_right + p_left), lam=dist.mu - k, mu=dist.lam + k)
    return tilted(dist, k, r)
