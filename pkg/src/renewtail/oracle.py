"""Exact lattice renewal tables by repeated convolution.

A table holds ``u_k = sum_{n >= 0} w**n P(S_n = d k)`` on an integer window,
together with a per-entry bound on what the truncated iteration left out.
The bound is positional: mass still inside the computational window at
position ``j`` can add at most ``u_0 exp(-r d (j - k)^+)`` to entry ``k``,
where ``r`` is the downward Lundberg rate ``sup{theta: w g(theta) <= 1}``
(``w**n exp(-r S_n)`` is a supermartingale) and ``u_0 = sup_k u_k``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.signal import fftconvolve, lfilter

from .dist import StepDistribution
from .errors import CertificationError, RegimeError
from .tilt import TiltParams, exponent_sup

_DIRECT_WORK_MAX = 4_000_000
_FFT_EPS = 1e-15
_ROUND_EPS = 2.3e-16


class TailValue(NamedTuple):
    value: float
    bound: float

    def __float__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class RenewalTable:
    d: float
    w: float
    k_lo: int
    k_hi: int
    u: np.ndarray
    bounds: np.ndarray
    n_steps_used: int
    decay_rate: float
    u0: float

    @property
    def trunc_bound(self) -> float:
        return float(self.bounds.max()) if len(self.bounds) else 0.0

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.k_lo, self.k_hi + 1)

    def __getitem__(self, k: int) -> float:
        if not self.k_lo <= k <= self.k_hi:
            raise IndexError(f"k={k} outside table window [{self.k_lo}, {self.k_hi}]")
        return float(self.u[k - self.k_lo])

    def bound_at(self, k: int) -> float:
        return float(self.bounds[k - self.k_lo])

    def window_envelope(self) -> tuple[float, float]:
        """``(alpha, beta)`` with ``H((x, x+h]) <= alpha h + beta`` on the table."""
        top = float(self.u.max())
        return top / self.d, top

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "dk", "u_k", "trunc_bound"])
        for k, uk, bk in zip(self.ks, self.u, self.bounds):
            w.writerow([int(k), f"{self.d * k:.17g}", f"{uk:.17g}", f"{bk:.17g}"])


def _convolve(p: np.ndarray, q: np.ndarray, use_fft: bool) -> np.ndarray:
    if use_fft:
        out = fftconvolve(p, q)
        np.maximum(out, 0.0, out=out)
        return out
    return np.convolve(p, q)


def _remaining_bound(p: np.ndarray, decay: float) -> np.ndarray:
    """``sum_j p_j min(1, decay**(j - i))`` for every index ``i``."""
    below = np.cumsum(p)
    # S_i = sum_{j > i} p_j decay**(j-i) = decay (p_{i+1} + S_{i+1})
    shifted = np.concatenate([p[1:], [0.0]])
    above = lfilter([decay], [1.0, -decay], shifted[::-1])[::-1]
    return below + above


def renewal_table(dist: StepDistribution, w: float = 1.0, k_lo: int = 0, k_hi: int = 0,
                  tol: float = 1e-13, atol: float = 1e-250, guard: Optional[int] = None,
                  max_steps: int = 1_000_000, check_every: int = 8) -> RenewalTable:
    """Renewal masses of a lattice walk on ``[k_lo, k_hi]``.

    Parameters
    ----------
    dist : lattice StepDistribution
    w : float
        Geometric weight in ``(0, 1]``; 1 gives the renewal measure ``H``.
    k_lo, k_hi : int
        Table window in lattice units.
    tol, atol : float
        Iteration stops once the bound on contributions still to come is at
        most ``tol * u_k + atol`` for every entry of the window.
    guard : int, optional
        Guard band in lattice steps; defaults to ``ceil(log(1/tol) / (r d))``.
    """
    if not dist.lattice:
        raise RegimeError("renewal tables need a lattice step law")
    if not 0 < w <= 1:
        raise ValueError("weight w must lie in (0, 1]")
    if k_lo > k_hi:
        raise ValueError("empty table window")
    if w == 1 and not dist.mean() > 0:
        raise RegimeError("renewal measure of a walk without positive drift is not locally finite")
    d = dist.d
    rate, _ = exponent_sup(dist, 1.0 / w)
    decay = math.exp(-rate * d)
    if guard is None:
        guard = int(math.ceil(math.log(1.0 / tol) / (rate * d)))
    lo = min(k_lo, 0) - guard
    hi = max(k_hi, 0) + guard
    n = hi - lo + 1

    kmin, kmax = dist.k_support
    kmin = int(max(kmin, -(n - 1)))
    kmax = int(min(kmax, n - 1))
    q = dist.pmf(np.arange(kmin, kmax + 1))
    nz = np.flatnonzero(q)
    q = q[nz[0]: nz[-1] + 1]
    kmin, kmax = kmin + int(nz[0]), kmin + int(nz[-1])
    jump_left = dist._wsum(0.0, -math.inf, kmin - 1)
    jump_right = dist._wsum(0.0, kmax + 1, math.inf)
    use_fft = len(q) * n > _DIRECT_WORK_MAX
    q_norm2 = float(np.sqrt(np.sum(q * q)))

    p = np.zeros(n)
    p[-lo] = 1.0
    u = p.copy()
    gone_left = gone_right = 0.0
    fft_err = 0.0
    win = slice(k_lo - lo, k_hi - lo + 1)
    steps = 0
    while True:
        steps += 1
        if steps > max_steps:
            raise CertificationError(
                f"renewal table not certified to tol={tol!r} within {max_steps} convolution steps")
        support = np.flatnonzero(p)
        if len(support) == 0:
            break
        a, b = int(support[0]), int(support[-1])
        m = math.fsum(p[a: b + 1])
        full = _convolve(p[a: b + 1], q, use_fft)
        if use_fft:
            fft_err += w * _FFT_EPS * math.log2(n + len(q)) * float(np.sqrt(np.sum(p * p))) * q_norm2
        # full[i] sits at position lo + a + kmin + i
        start = lo + a + kmin
        i0 = max(0, lo - start)
        i1 = min(len(full), hi - start + 1)
        p_new = np.zeros(n)
        if i0 < i1:
            p_new[start + i0 - lo: start + i1 - lo] = full[i0:i1]
        gone_left += w * (math.fsum(full[:i0]) + m * jump_left)
        gone_right += w * (math.fsum(full[i1:]) + m * jump_right)
        p = w * p_new
        u += p
        if steps % check_every == 0 or not p.any():
            u0 = u[-lo]
            rest = u0 * _remaining_bound(p, decay)[win]
            if np.all(rest <= tol * u[win] + atol):
                break

    u0 = float(u[-lo])
    ks = np.arange(k_lo, k_hi + 1)
    bounds = (u0 * _remaining_bound(p, decay)[win]
              + gone_left * u0
              + gone_right * u0 * decay ** (hi + 1 - ks)
              + fft_err
              + _ROUND_EPS * steps * u[win])
    return RenewalTable(d=d, w=w, k_lo=k_lo, k_hi=k_hi, u=u[win].copy(), bounds=bounds,
                        n_steps_used=steps, decay_rate=rate, u0=u0)


def window_mass(tab: RenewalTable, x: float, h: float) -> float:
    """``sum u_k`` over lattice points ``d k`` in ``(x, x+h]``."""
    if h < 0:
        raise ValueError("window length must be non-negative")
    k1 = _index_floor(x / tab.d) + 1
    k2 = _index_floor((x + h) / tab.d)
    if k1 > k2:
        return 0.0
    if k1 < tab.k_lo or k2 > tab.k_hi:
        raise IndexError(f"window ({x!r}, {x + h!r}] not inside table [{tab.k_lo}, {tab.k_hi}] (units of d)")
    return math.fsum(tab.u[k1 - tab.k_lo: k2 - tab.k_lo + 1])


def _index_floor(v: float) -> int:
    r = round(v)
    if abs(v - r) <= 1e-9 * max(1.0, abs(v)):
        return int(r)
    return math.floor(v)


def left_tail_direct(tab_p: RenewalTable, x: float, rtol: float = 1e-6) -> TailValue:
    """``H((-inf, -x))`` from a P-side table, with a geometric bound beyond ``k_lo``."""
    if x < 0:
        raise ValueError("x must be non-negative")
    k_star = -_index_floor(x / tab_p.d) - 1
    if k_star > tab_p.k_hi:
        raise IndexError(f"table must reach k={k_star}")
    if k_star < tab_p.k_lo:
        raise IndexError(f"x={x!r} lies below the table window; extend k_lo")
    sl = slice(0, k_star - tab_p.k_lo + 1)
    value = math.fsum(tab_p.u[sl])
    r = tab_p.decay_rate * tab_p.d
    beyond = tab_p.u0 * math.exp(r * (tab_p.k_lo - 1)) / -math.expm1(-r)
    bound = beyond + math.fsum(tab_p.bounds[sl])
    if bound > rtol * value:
        raise CertificationError(f"left-tail remainder {bound:.3g} exceeds rtol={rtol} of value {value:.3g}")
    return TailValue(value, bound)


def _q_side_terms(tab_q: RenewalTable, tp: TiltParams, x: float):
    if abs(tab_q.w - tp.rho) > 1e-14:
        raise ValueError(f"Q-side table weight {tab_q.w!r} must equal rho={tp.rho!r}")
    k1 = _index_floor(x / tab_q.d) + 1
    if k1 < tab_q.k_lo:
        raise IndexError(f"x={x!r} below Q-table window starting at k={tab_q.k_lo}")
    if k1 > tab_q.k_hi:
        raise IndexError(f"x={x!r} beyond Q-table window ending at k={tab_q.k_hi}")
    ks = np.arange(k1, tab_q.k_hi + 1)
    h = tab_q.d * ks - x
    return ks, h, tab_q.u[k1 - tab_q.k_lo:], tab_q.bounds[k1 - tab_q.k_lo:]


def left_tail_from_q(tab_q: RenewalTable, tp: TiltParams, x: float, scaled: bool = False,
                     rtol: float = 1e-6) -> TailValue:
    """``H((-inf, -x)) = sum_{d k > x} exp(-kappa d k) u^Q_k``.

    With ``scaled=True`` the result is ``exp(kappa x) H((-inf, -x))``, which
    stays representable far past the underflow point of ``H`` itself.
    """
    kap = tp.kappa
    ks, h, uq, bq = _q_side_terms(tab_q, tp, x)
    wts = np.exp(-kap * h)
    value = math.fsum(wts * uq)
    h_next = tab_q.d * (tab_q.k_hi + 1) - x
    beyond = tab_q.u0 * math.exp(-kap * h_next) / -math.expm1(-kap * tab_q.d)
    bound = beyond + math.fsum(wts * bq)
    if bound > rtol * value:
        raise CertificationError(f"Q-side remainder {bound:.3g} exceeds rtol={rtol} of value {value:.3g}")
    if scaled:
        return TailValue(value, bound)
    f = math.exp(-kap * x)
    return TailValue(value * f, bound * f)


def identity_residual(tab_p: RenewalTable, tab_q: RenewalTable, tp: TiltParams, x: float,
                      quad_tol: float = 1e-8) -> float:
    """Relative gap between ``H((-inf,-x))`` and ``kappa e^{-kappa x} int_0^inf e^{-kappa h} H_Q((x,x+h]) dh``.

    ``H_Q((x, x+h])`` is a step function of ``h`` jumping at the lattice
    points, so the integral is a finite weighted sum plus a bounded tail.
    """
    kap = tp.kappa
    lhs = left_tail_direct(tab_p, x, rtol=quad_tol)
    lhs_scaled = lhs.value * math.exp(kap * x)
    lhs_bound = lhs.bound * math.exp(kap * x)

    ks, h, uq, bq = _q_side_terms(tab_q, tp, x)
    F = np.cumsum(uq)
    # int_{h_j}^{h_{j+1}} e^{-kappa h} dh = e^{-kappa h_j}(1 - e^{-kappa d}) / kappa
    piece = np.exp(-kap * h) * -math.expm1(-kap * tab_q.d) / kap
    integral = math.fsum(F[:-1] * piece[:-1]) + F[-1] * math.exp(-kap * h[-1]) / kap
    tail = tab_q.u0 * math.exp(-kap * h[-1]) / (tab_q.d * kap * kap)
    trunc = math.fsum(np.cumsum(bq) * piece)
    rhs_scaled = kap * integral
    rhs_bound = kap * (tail + trunc)
    if rhs_bound + lhs_bound > quad_tol * lhs_scaled:
        raise CertificationError(
            f"identity at x={x!r}: truncation bounds {rhs_bound + lhs_bound:.3g} exceed "
            f"quad_tol={quad_tol} of the left side {lhs_scaled:.3g}; widen the tables")
    return abs(lhs_scaled - rhs_scaled) / lhs_scaled


def wy09_ratio(q_dist: StepDistribution, rho: float, x: float, T: float = 1.0,
               table: Optional[RenewalTable] = None, tol: float = 1e-13) -> float:
    """``eta((x, x+T]) (1-rho)^2 / (rho mu((x, x+T]))`` for ``eta = sum rho^n mu^{*n}``."""
    if not 0 < rho < 1:
        raise RegimeError(f"defective renewal ratio needs rho < 1, got {rho!r}")
    mu = q_dist.mass(x, x + T)
    if mu == 0:
        raise ZeroDivisionError(f"mu(({x!r}, {x + T!r}]) = 0")
    if table is None:
        d = q_dist.d
        table = renewal_table(q_dist, w=rho, k_lo=_index_floor(x / d), k_hi=_index_floor((x + T) / d) + 1, tol=tol)
    eta = window_mass(table, x, T)
    return eta * (1 - rho) ** 2 / (rho * mu)
