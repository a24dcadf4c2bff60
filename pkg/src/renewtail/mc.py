"""Monte Carlo estimates of ``H((-inf, -x))``.

Two estimators:

* naive: simulate the walk under ``P`` for a finite horizon and count visits
  below ``-x``;
* tilted: simulate the walk of ``-X`` under ``Q`` and accumulate the
  likelihood-ratio weights ``rho**n exp(-kappa S_n) 1{S_n > x}``.

Paths are grouped in fixed-size blocks; block ``b`` draws from a Philox
stream keyed by ``(seed, b)``, so estimates do not depend on how blocks are
spread over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dist import StepDistribution
from .errors import CertificationError
from .tilt import TiltParams, tilt_step_law

BLOCK = 4096
_CHUNK = 128


@dataclass(frozen=True)
class TailEstimate:
    x: float
    value: float
    std_error: float
    n_paths: int
    method: str
    seed: int
    truncation_note: str = ""

    def csv_row(self) -> list[str]:
        return [f"{self.x:.17g}", f"{self.value:.17g}", f"{self.std_error:.17g}",
                str(self.n_paths), self.method, str(self.seed)]


CSV_HEADER = ["x", "value", "std_error", "n_paths", "method", "seed"]


def block_rng(seed: int, block: int) -> np.random.Generator:
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be a non-negative 64-bit integer")
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(block)))


def _run_blocks(fn, n_paths: int, workers: int) -> np.ndarray:
    sizes = [min(BLOCK, n_paths - i) for i in range(0, n_paths, BLOCK)]
    jobs = list(enumerate(sizes))
    if workers <= 1:
        parts = [fn(b, m) for b, m in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    return np.concatenate(parts, axis=0)


def _summarise(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    sd = samples.std(axis=0, ddof=1) if n > 1 else np.zeros_like(mean)
    return mean, sd / math.sqrt(n)


def estimate_naive_grid(dist: StepDistribution, xs: Sequence[float], n_paths: int, horizon: int,
                        seed: int, workers: int = 1) -> list[TailEstimate]:
    """Visit counts below ``-x`` for every ``x`` in ``xs`` along shared paths."""
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < 0):
        raise ValueError("x must be non-negative")

    def block(b, m):
        rng = block_rng(seed, b)
        s = np.zeros(m)
        counts = np.zeros((m, len(xs)))
        for t0 in range(0, horizon, _CHUNK):
            steps = dist.sample(rng, (m, min(_CHUNK, horizon - t0)))
            path = s[:, None] + np.cumsum(steps, axis=1)
            for i, x in enumerate(xs):
                counts[:, i] += np.count_nonzero(path < -x, axis=1)
            s = path[:, -1]
        return counts

    mean, se = _summarise(_run_blocks(block, n_paths, workers))
    note = f"horizon={horizon}; visits after the horizon are dropped"
    return [TailEstimate(float(x), float(v), float(e), n_paths, "NAIVE", seed, note)
            for x, v, e in zip(xs, mean, se)]


def estimate_naive(dist: StepDistribution, x: float, n_paths: int, horizon: int, seed: int,
                   workers: int = 1) -> TailEstimate:
    return estimate_naive_grid(dist, [x], n_paths, horizon, seed, workers)[0]


def truncation_margin(dist: StepDistribution, tp: TiltParams, eps_trunc: float) -> float:
    kap = tp.kappa
    mean = float(dist.mean())
    limit = tp.g_prime_kappa.reciprocal_times(1.0 / kap)
    m = math.log(1.0 / eps_trunc) / kap
    for _ in range(100):
        nxt = (math.log(1.0 / eps_trunc) + math.log(1.0 + m / mean + limit)) / kap
        if abs(nxt - m) < 1e-12:
            break
        m = nxt
    return m


def estimate_tilted_grid(dist: StepDistribution, tp: TiltParams, xs: Sequence[float], n_paths: int,
                         seed: int, eps_trunc: float = 1e-4, workers: int = 1,
                         max_steps: int = 200_000) -> list[TailEstimate]:
    """Importance-sampling estimates on common random numbers.

    Each path runs until it exceeds ``max(xs) + M``.  Past that point the
    expected remaining scaled weight is at most ``exp(-kappa M) V(M)`` where
    ``V(M) = 1 + M / E X + 1 / (kappa g'(kappa))`` bounds the P-visits below
    ``M``; ``M`` is the smallest margin with ``exp(-kappa M) V(M) <= eps_trunc``.
    """
    if tp.g_prime_kappa.inf:
        raise CertificationError(
            "tilted walk has infinite mean; path-truncation bias is not certifiable (use the lattice oracle)")
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < 0):
        raise ValueError("x must be non-negative")
    q = tilt_step_law(dist, tp)
    kap, log_rho = tp.kappa, math.log(tp.rho)
    margin = truncation_margin(dist, tp, eps_trunc)
    stop_at = float(xs.max()) + margin

    def block(b, m):
        rng = block_rng(seed, b)
        s = np.zeros(m)
        w = np.zeros((m, len(xs)))  # scaled: exp(kappa x) * weights
        alive = np.arange(m)
        n = 0
        while alive.size:
            n += 1
            if n > max_steps:
                raise CertificationError(
                    f"{alive.size} tilted paths still below x+M={stop_at:.6g} after {max_steps} steps")
            s[alive] += q.sample(rng, alive.size)
            sa = s[alive]
            for i, x in enumerate(xs):
                hit = sa > x
                if hit.any():
                    w[alive[hit], i] += np.exp(n * log_rho - kap * (sa[hit] - x))
            alive = alive[sa <= stop_at]
        return w

    mean, se = _summarise(_run_blocks(block, n_paths, workers))
    note = f"paths stopped above x_max+M, M={margin:.6g} (eps_trunc={eps_trunc:g})"
    out = []
    for x, v, e in zip(xs, mean, se):
        f = math.exp(-kap * x)
        out.append(TailEstimate(float(x), float(v) * f, float(e) * f, n_paths, "TILTED", seed, note))
    return out


def estimate_tilted(dist: StepDistribution, tp: TiltParams, x: float, n_paths: int, seed: int,
                    eps_trunc: float = 1e-4, workers: int = 1, max_steps: int = 200_000) -> TailEstimate:
    return estimate_tilted_grid(dist, tp, [x], n_paths, seed, eps_trunc, workers, max_steps)[0]
