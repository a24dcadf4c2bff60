"""Asymptotic predictions for ``H((-inf, -x))`` and the regime dispatcher.

All predictors return the finite-``x`` plug-in value of a limit statement;
nothing here claims a convergence rate.  With ``scaled=True`` the factor
``exp(-kappa x)`` is dropped, which keeps values representable deep in the
tail.

Regimes, decided from ``(rho, span, g'(kappa))`` only:

========== ============================================= =========================
tag        condition                                     constant
========== ============================================= =========================
(a-i)      rho = 1, non-arithmetic, g'(kappa) finite     ``1 / (kappa g')``
(a-ii)     rho = 1, span d, g'(kappa) finite             ``d / ((e^{kappa d}-1) g')``
(a-i)-SRT  rho = 1, g'(kappa) infinite                   ``1 / (G(a) G(2-a) kappa m(x))``
(b)        rho < 1                                       local window mass ratio
========== ============================================= =========================
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .dist import PolyGeomLattice, RegVarExpLeft, StepDistribution
from .errors import RegimeError
from .tilt import TiltParams, tilt_step_law


class Regime(str, enum.Enum):
    A_I = "(a-i)"
    A_I_SRT = "(a-i)-SRT"
    A_II = "(a-ii)"
    B = "(b)"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SrtSpec:
    """Index ``alpha`` and constant ``c_L`` of a tilted left tail ``~ c_L t**-alpha``."""

    alpha: float
    c_L: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not self.c_L > 0:
            raise ValueError(f"c_L must be positive, got {self.c_L!r}")

    @property
    def needs_srtc_diagnostic(self) -> bool:
        """For ``alpha <= 1/2`` the strong renewal theorem needs an extra local condition."""
        return self.alpha <= 0.5


def _exp_factor(kappa: float, x: float, scaled: bool) -> float:
    return 1.0 if scaled else math.exp(-kappa * x)


def _require_rho_one(tp: TiltParams, what: str) -> None:
    if tp.rho != 1.0:
        raise RegimeError(f"{what} needs rho = 1, got rho = {tp.rho!r}")


# -- constants --------------------------------------------------------------

def srt_constant(alpha: float) -> float:
    """``1 / (Gamma(alpha) Gamma(2 - alpha))``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    return 1.0 / (math.gamma(alpha) * math.gamma(2.0 - alpha))


def srt_constant_reflection(alpha: float) -> float:
    """Same constant through the reflection formula: ``sin(pi alpha) / ((1 - alpha) pi)``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    return math.sin(math.pi * alpha) / ((1.0 - alpha) * math.pi)


def lattice_factor(kappa: float, d: Optional[float]) -> float:
    """``kappa d / (e^{kappa d} - 1)``, the ratio of the arithmetic to the non-arithmetic constant.

    Returns 1 for non-arithmetic laws (``d`` None).
    """
    if d is None:
        return 1.0
    kd = kappa * d
    return kd / math.expm1(kd)


# -- predictors -------------------------------------------------------------

def predict_nonarithmetic(tp: TiltParams, x: float = 0.0, scaled: bool = True) -> float:
    """``1 / (kappa g'(kappa))``, zero when ``g'(kappa)`` is infinite.

    With ``scaled=False`` the value is multiplied by ``exp(-kappa x)``.
    """
    _require_rho_one(tp, "the non-arithmetic constant")
    if tp.span is not None:
        raise RegimeError(f"law is arithmetic with span {tp.span!r}; use predict_arithmetic")
    return tp.g_prime_kappa.reciprocal_times(1.0 / tp.kappa) * _exp_factor(tp.kappa, x, scaled)


def predict_arithmetic(tp: TiltParams, d: Optional[float] = None, x: float = 0.0,
                       scaled: bool = True) -> float:
    """``d / ((e^{kappa d} - 1) g'(kappa))``, zero when ``g'(kappa)`` is infinite.

    ``d`` defaults to the detected span; passing it explicitly evaluates the
    formula at any step size (useful for the small-``d`` consistency check).
    """
    _require_rho_one(tp, "the arithmetic constant")
    if d is None:
        d = tp.span
    if d is None:
        raise RegimeError("law is non-arithmetic; use predict_nonarithmetic")
    if not d > 0:
        raise ValueError(f"span must be positive, got {d!r}")
    return tp.g_prime_kappa.reciprocal_times(d / math.expm1(tp.kappa * d)) * _exp_factor(tp.kappa, x, scaled)


def predict_window(tp: TiltParams, delta: float) -> float:
    """Limit of ``e^{kappa x} H((-x - delta, -x))``: ``(1 - e^{-delta kappa}) / (kappa g'(kappa))``."""
    _require_rho_one(tp, "the window limit")
    if tp.span is not None:
        raise RegimeError(f"window limit is for non-arithmetic laws; span is {tp.span!r}")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    return tp.g_prime_kappa.reciprocal_times(-math.expm1(-delta * tp.kappa) / tp.kappa)


def _lattice_survival(q: StepDistribution, k_hi: int) -> np.ndarray:
    """``S[j] = Q(Y > d j)`` for ``j = 0..k_hi``, summed from the top to avoid cancellation."""
    ks = np.arange(1, k_hi + 1)
    pm = q.pmf(ks)
    top = q.survival(q.d * k_hi)
    tail = np.concatenate([np.cumsum(pm[::-1])[::-1], [0.0]])
    return top + tail


def truncated_mean(q_dist, x: float) -> float:
    """``m(x) = int_0^x Q(Y > t) dt`` for the step law ``Y`` of the tilted walk.

    Lattice laws are integrated exactly as a staircase.  Anything else only
    needs a ``survival(t)`` method and is integrated by adaptive quadrature.
    """
    if x <= 0:
        return 0.0
    if getattr(q_dist, "lattice", False):
        d = q_dist.d
        K = int(math.floor(x / d))
        S = _lattice_survival(q_dist, K)
        # Q(Y > t) = S[j] on [d j, d (j+1))
        return d * math.fsum(S[:K]) + (x - d * K) * float(S[K])
    points = [p for p in (1.0, x / 2) if 0 < p < x]
    val, _ = quad(q_dist.survival, 0.0, x, points=points or None, epsrel=1e-11, epsabs=0.0, limit=500)
    return val


def predict_srt(tp: TiltParams, spec: SrtSpec, q_dist, x: float, scaled: bool = False) -> float:
    """Strong-renewal-theorem prediction ``e^{-kappa x} / (Gamma(a) Gamma(2-a) kappa m(x))``.

    ``q_dist`` is the tilted step law, and ``m`` its truncated mean.
    """
    _require_rho_one(tp, "the strong renewal prediction")
    if tp.g_prime_kappa.finite:
        raise RegimeError(f"g'(kappa) = {tp.g_prime_kappa} is finite; the strong renewal branch needs it infinite")
    m = truncated_mean(q_dist, x)
    if not m > 0:
        raise ValueError(f"truncated mean m({x!r}) = {m!r}; prediction undefined")
    return srt_constant(spec.alpha) / (tp.kappa * m) * _exp_factor(tp.kappa, x, scaled)


def local_window_moment(dist: StepDistribution, kappa: float, x: float) -> float:
    """``E[e^{-kappa X}; x < -X <= x + 1]``."""
    return max(dist._sum(kappa, -x - 1.0, -x, closed="left"), 0.0)


def predict_local_subexp(dist: StepDistribution, tp: TiltParams, x: float, scaled: bool = False) -> float:
    """Defective-case prediction ``e^{-kappa x} E[e^{-kappa X}; x < -X <= x+1] / (kappa (1-rho)^2)``."""
    if not tp.rho < 1:
        raise RegimeError("the local prediction is for rho < 1")
    num = local_window_moment(dist, tp.kappa, x)
    return num / (tp.kappa * (1.0 - tp.rho) ** 2) * _exp_factor(tp.kappa, x, scaled)


# -- SRTc diagnostic --------------------------------------------------------

def srtc_integral(q_dist, delta: float, x: float) -> float:
    """``int_1^{delta x} (F(x) - F(x - z)) / (Fbar(z) z^2) dz`` with ``F`` the cdf of ``q_dist``.

    Returns ``inf`` when the numerator is positive where ``Fbar`` vanishes.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    top = delta * x
    if top <= 1.0:
        return 0.0
    if getattr(q_dist, "lattice", False):
        return _srtc_lattice(q_dist, x, top)

    def integrand(z):
        num = q_dist.mass(x - z, x)
        if num <= 0:
            return 0.0
        den = q_dist.survival(z)
        return math.inf if den <= 0 else num / (den * z * z)

    val, _ = quad(integrand, 1.0, top, epsrel=1e-8, epsabs=0.0, limit=500)
    return val


def _srtc_lattice(q: StepDistribution, x: float, top: float) -> float:
    d = q.d
    # integrand is c / z^2 between consecutive breakpoints {d k} and {x - d k}
    k_a = np.arange(math.floor(1.0 / d), math.floor(top / d) + 2)
    k_b = np.arange(math.floor((x - top) / d) - 1, math.floor((x - 1.0) / d) + 2)
    z = np.concatenate([[1.0, top], d * k_a, x - d * k_b])
    z = np.unique(z[(z >= 1.0) & (z <= top)])
    if len(z) < 2:
        return 0.0
    mid = 0.5 * (z[:-1] + z[1:])

    # numerator Q(x - z < Y <= x) = C[floor(x/d)] - C[floor((x - z)/d)], C cumulative on the index range
    j_lo = int(math.floor((x - top) / d)) - 1
    j_hi = int(math.floor(x / d))
    cum = np.concatenate([[0.0], np.cumsum(q.pmf(np.arange(j_lo + 1, j_hi + 1)))])
    idx = np.floor((x - mid) / d).astype(np.int64)
    num = cum[-1] - cum[idx - j_lo]

    S = _lattice_survival(q, int(math.floor(top / d)) + 1)
    den = S[np.floor(mid / d).astype(np.int64)]

    live = num > 0
    if np.any(live & (den <= 0)):
        return math.inf
    w = 1.0 / z[:-1] - 1.0 / z[1:]
    return math.fsum((num[live] / den[live]) * w[live])


# -- dispatcher -------------------------------------------------------------

def classify(tp: TiltParams, allow_ambiguous: bool = False) -> Regime:
    """The single applicable regime for ``tp``.

    Ambiguous instances (``g(theta_fin)`` within tolerance of 1) are rejected
    unless ``allow_ambiguous`` is set, in which case the ``rho = 1`` branch the
    solver chose is returned.
    """
    if tp.ambiguous and not allow_ambiguous:
        raise RegimeError(
            "g(theta_fin) is within tolerance of 1: both the rho = 1 branch and the rho < 1 branch "
            "are plausible; see applicable_regimes")
    return _classify(tp)


def _classify(tp: TiltParams) -> Regime:
    if tp.rho < 1:
        return Regime.B
    if tp.rho != 1:
        raise RegimeError(f"rho = {tp.rho!r} exceeds 1")
    if tp.g_prime_kappa.inf:
        return Regime.A_I_SRT
    return Regime.A_II if tp.span is not None else Regime.A_I


def applicable_regimes(tp: TiltParams) -> list[Regime]:
    """One regime normally; two for an ambiguous boundary instance."""
    if tp.ambiguous:
        return [_classify(tp), Regime.B]
    return [_classify(tp)]


def srt_spec_for(dist: StepDistribution, tp: TiltParams) -> SrtSpec:
    """Read ``alpha`` and ``c_L`` off a family built to sit on the strong renewal boundary."""
    if isinstance(dist, PolyGeomLattice) and tp.boundary and 1 < dist.beta < 2:
        alpha = dist.beta - 1.0
        # Q(Y = d k) = C k^-beta / rho, so Q(Y > t) ~ C (t/d)^-alpha / (alpha rho)
        return SrtSpec(alpha, dist.C * dist.d ** alpha / (alpha * tp.rho))
    if isinstance(dist, RegVarExpLeft) and tp.boundary:
        return SrtSpec(dist.alpha, dist.c / tp.rho)
    raise RegimeError(f"no regularly varying tilted tail is known for {dist!r}")


def predict(dist: StepDistribution, tp: TiltParams, x: float, scaled: bool = False,
            regime: Optional[Regime] = None, q_dist=None, spec: Optional[SrtSpec] = None,
            allow_ambiguous: bool = False) -> float:
    """Prediction for ``H((-inf, -x))`` in ``regime`` (default: the classified one)."""
    regime = classify(tp, allow_ambiguous) if regime is None else Regime(regime)
    if regime is Regime.A_I:
        return predict_nonarithmetic(tp, x, scaled)
    if regime is Regime.A_II:
        return predict_arithmetic(tp, x=x, scaled=scaled)
    if regime is Regime.B:
        if tp.ambiguous:
            raise RegimeError("rho is 1 to within tolerance; the rho < 1 constant is unbounded")
        return predict_local_subexp(dist, tp, x, scaled)
    if spec is None:
        spec = srt_spec_for(dist, tp)
    if q_dist is None:
        q_dist = tilt_step_law(dist, tp)
    return predict_srt(tp, spec, q_dist, x, scaled)
