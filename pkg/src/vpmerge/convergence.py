"""Convergence-to-Gaussianity detection and distribution-distance checks.

Convergence of the forward process is read off a battery of 1-D
D'Agostino-Pearson omnibus tests over coordinate and random-projection
views: the detected step is the first at which the fraction of rejecting
views drops to 1.5 * alpha (the slack absorbs false positives at the
nominal level).

Also here: 1-D total-variation distance on grid densities, the
moment-based TV bound d_TV <= C_n (M^2 + B) with C_n = c0 (1+n!) (2^n+48),
and an empirical characteristic-function distance over seeded Gaussian
frequency probes (a Monte-Carlo stand-in for the L2 frequency norm, which
is intractable on a dense grid in high dimension).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, DomainError
from .forward import TrajectorySweep

__all__ = [
    "NormalityReport",
    "RandomProjections",
    "TVBoundReport",
    "CFDistance",
    "dagostino_pearson",
    "convergence_step",
    "tv_distance_1d",
    "moment_tv_check",
    "empirical_cf_distance",
]

REJECTION_SLACK = 1.5


@dataclass(frozen=True)
class RandomProjections:
    """View spec: this many seeded unit-vector projections."""

    count: int
    seed: int = 0


@dataclass(frozen=True)
class NormalityReport:
    alpha: float
    detected_step: int
    steps: tuple  # (step, rejection fraction) pairs
    decisions: tuple
    degenerate_views: tuple = ()

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "detected_step": self.detected_step,
            "steps": [{"t": int(t), "reject_frac": float(r)} for t, r in self.steps],
        }


@dataclass(frozen=True)
class TVBoundReport:
    d_tv: float
    moment_bound: float      # M: max centered-moment gap up to order n
    second_moment_bound: float  # B: max of |mean| and variance over both
    constant: float          # C_n
    bound_value: float       # C_n (M^2 + B)
    holds: bool


@dataclass(frozen=True)
class CFDistance:
    delta: float
    freq_count: int
    freq_scale: float
    seed: int


def _dp_statistics(views: np.ndarray) -> np.ndarray:
    """K^2 = Z_skew^2 + Z_kurt^2 per column (D'Agostino & Pearson omnibus)."""
    n = views.shape[0]
    dev = views - views.mean(axis=0)
    dev2 = dev * dev  # multiplication chains; float pow is several x slower
    m2 = dev2.mean(axis=0)
    if np.any(m2 == 0.0):
        raise DegenerateError("zero-variance view")
    m3 = (dev2 * dev).mean(axis=0)
    m4 = (dev2 * dev2).mean(axis=0)

    # transformed skewness (D'Agostino 1970)
    g1 = m3 / m2**1.5
    y = g1 * math.sqrt((n + 1) * (n + 3) / (6.0 * (n - 2)))
    beta2 = 3.0 * (n * n + 27 * n - 70) * (n + 1) * (n + 3) / (
        (n - 2.0) * (n + 5) * (n + 7) * (n + 9)
    )
    w2 = -1.0 + math.sqrt(2.0 * (beta2 - 1.0))
    delta = 1.0 / math.sqrt(math.log(math.sqrt(w2)))
    alpha = math.sqrt(2.0 / (w2 - 1.0))
    z_skew = delta * np.log(y / alpha + np.sqrt((y / alpha) ** 2 + 1.0))

    # transformed kurtosis (Anscombe & Glynn 1983)
    b2 = m4 / m2**2
    e_b2 = 3.0 * (n - 1) / (n + 1)
    var_b2 = 24.0 * n * (n - 2) * (n - 3) / ((n + 1) ** 2 * (n + 3) * (n + 5))
    x = (b2 - e_b2) / math.sqrt(var_b2)
    sqrt_beta1 = (
        6.0 * (n * n - 5 * n + 2) / ((n + 7) * (n + 9))
        * math.sqrt(6.0 * (n + 3) * (n + 5) / (n * (n - 2) * (n - 3)))
    )
    a = 6.0 + 8.0 / sqrt_beta1 * (
        2.0 / sqrt_beta1 + math.sqrt(1.0 + 4.0 / sqrt_beta1**2)
    )
    z_kurt = (
        (1.0 - 2.0 / (9.0 * a))
        - np.cbrt((1.0 - 2.0 / a) / (1.0 + x * np.sqrt(2.0 / (a - 4.0))))
    ) / math.sqrt(2.0 / (9.0 * a))

    return z_skew**2 + z_kurt**2


def dagostino_pearson(sample):
    """(K^2, p) for a 1-D sample, or arrays of both for a (N, V) batch.

    p is the chi-square(2) upper tail of K^2, i.e. exp(-K^2 / 2).
    """
    arr = np.asarray(sample, dtype=np.float64)
    one_d = arr.ndim == 1
    if one_d:
        arr = arr[:, None]
    if arr.shape[0] < 20:
        raise DomainError(f"need at least 20 samples, got {arr.shape[0]}")
    k2 = _dp_statistics(arr)
    p = np.exp(-0.5 * k2)
    if one_d:
        return float(k2[0]), float(p[0])
    return k2, p


def _view_matrix(snapshot: np.ndarray, views, rng_cache: dict) -> np.ndarray:
    if views == "coordinates":
        return snapshot
    if isinstance(views, RandomProjections):
        d = snapshot.shape[1]
        if "proj" not in rng_cache:
            rng = np.random.Generator(
                np.random.Philox(key=np.array([views.seed, 0xC0DE], dtype=np.uint64))
            )
            proj = rng.standard_normal((d, views.count))
            proj /= np.linalg.norm(proj, axis=0)
            rng_cache["proj"] = proj
        return np.hstack([snapshot, snapshot @ rng_cache["proj"]])
    raise DomainError(f"unknown views spec {views!r}")


def convergence_step(sweep: TrajectorySweep, alpha: float = 0.05,
                     views="coordinates",
                     stop_at_detection: bool = False) -> NormalityReport:
    """First sweep step at which the view battery looks Gaussian.

    Scans steps upward; per step the rejection fraction at level alpha is
    compared to REJECTION_SLACK * alpha.  Degenerate views are recorded
    and excluded from the fraction, never fatal.  If no step passes, the
    detected step is reported as the horizon.  stop_at_detection skips
    the remaining steps once the decision fires (the detected step is
    unaffected; the per-step series just ends there).
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if len(sweep.steps) < 1:
        raise DomainError("sweep has no steps")
    rng_cache: dict = {}
    fractions, decisions, degenerate = [], [], []
    detected = None
    for t in sweep.steps:
        mat = _view_matrix(sweep.snapshot(t), views, rng_cache)
        live = mat.var(axis=0) > 0.0
        n_deg = int(np.sum(~live))
        if not np.any(live):
            raise DegenerateError(f"all views degenerate at step {t}")
        _, pvals = dagostino_pearson(mat[:, live])
        pvals = np.atleast_1d(pvals)
        frac = float(np.mean(pvals < alpha))
        ok = frac <= REJECTION_SLACK * alpha
        fractions.append((int(t), frac))
        decisions.append(ok)
        degenerate.append(n_deg)
        if ok and detected is None:
            detected = int(t)
            if stop_at_detection:
                break
    return NormalityReport(
        alpha=alpha,
        detected_step=detected if detected is not None else sweep.horizon,
        steps=tuple(fractions),
        decisions=tuple(decisions),
        degenerate_views=tuple(degenerate),
    )


def _check_density(p: np.ndarray, grid: np.ndarray, name: str) -> None:
    if p.shape != grid.shape:
        raise DomainError(f"{name} and grid shapes differ")
    if np.any(p < 0):
        raise DomainError(f"{name} has negative mass")
    total = np.trapezoid(p, grid)
    if abs(total - 1.0) > 1e-6:
        raise DomainError(f"{name} integrates to {total}, not 1")


def tv_distance_1d(p, q, grid) -> float:
    """Total-variation distance (1/2) int |p - q| on a shared grid."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    _check_density(p, grid, "p")
    _check_density(q, grid, "q")
    return float(0.5 * np.trapezoid(np.abs(p - q), grid))


def _grid_central_moments(p: np.ndarray, grid: np.ndarray, up_to: int) -> np.ndarray:
    mean = np.trapezoid(grid * p, grid)
    dev = grid - mean
    moments = np.empty(up_to + 1)
    moments[0] = mean  # slot 0 carries the raw mean for the B bound
    for k in range(1, up_to + 1):
        moments[k] = np.trapezoid(dev**k * p, grid)
    return moments


def moment_tv_check(p, q, grid, n: int, c0: float = 1.0) -> TVBoundReport:
    """Check d_TV(p, q) <= C_n (M^2 + B) with C_n = c0 (1 + n!) (2^n + 48).

    M is the largest gap between centered moments up to order n; B bounds
    |mean| and the variance of both densities.
    """
    if n < 2:
        raise DomainError("moment order n must be >= 2")
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    d_tv = tv_distance_1d(p, q, grid)
    mp = _grid_central_moments(p, grid, n + 1)
    mq = _grid_central_moments(q, grid, n + 1)
    m_bound = float(np.max(np.abs(mp[1 : n + 1] - mq[1 : n + 1])))
    b_bound = float(max(abs(mp[0]), abs(mq[0]), mp[2], mq[2]))
    c_n = c0 * (1.0 + math.factorial(n)) * (2.0**n + 48.0)
    bound = c_n * (m_bound**2 + b_bound)
    return TVBoundReport(
        d_tv=d_tv, moment_bound=m_bound, second_moment_bound=b_bound,
        constant=c_n, bound_value=bound, holds=bool(d_tv <= bound),
    )


def empirical_cf_distance(a, b, freq_count: int = 64,
                          freq_scale: float | None = None,
                          seed: int = 0) -> CFDistance:
    """RMS gap between empirical characteristic functions at seeded probes.

    Probes are freq_scale * N(0, I_d) draws; freq_scale defaults to
    1/sqrt(d) so probe energy matches unit-variance data.
    """
    xa = a.features if hasattr(a, "features") else np.asarray(a, dtype=np.float64)
    xb = b.features if hasattr(b, "features") else np.asarray(b, dtype=np.float64)
    if xa.shape[1] != xb.shape[1]:
        raise DomainError(f"dimension mismatch: {xa.shape[1]} vs {xb.shape[1]}")
    if freq_count < 1:
        raise DomainError("freq_count must be >= 1")
    d = xa.shape[1]
    scale = freq_scale if freq_scale is not None else 1.0 / math.sqrt(d)
    rng = np.random.Generator(
        np.random.Philox(key=np.array([seed, 0xF0F0], dtype=np.uint64))
    )
    freqs = scale * rng.standard_normal((freq_count, d))
    phi_a = np.exp(1j * xa @ freqs.T).mean(axis=0)
    phi_b = np.exp(1j * xb @ freqs.T).mean(axis=0)
    delta = float(np.sqrt(np.mean(np.abs(phi_a - phi_b) ** 2)))
    return CFDistance(delta=delta, freq_count=freq_count,
                      freq_scale=float(scale), seed=seed)
