"""Variance-preserving noise schedules.

A linear schedule beta(t) drives the forward process
    dx = -1/2 beta(t) x dt + sqrt(beta(t)) dW,
whose marginal is N(J(t) x0, (1 - J(t)^2) I) with the signal-attenuation
factor J(t) = exp(-1/2 int_0^t beta).  For a linear beta the integral is
closed form, so J, SNR and the mixing-time prediction are all analytic.

Conventions: t = 0 is clean data, t = horizon_T is (near) white noise.
The discrete DDPM schedule puts beta_t on steps 1..T with
beta_t = beta0 + (betaT - beta0) (t - 1) / (T - 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "NoiseSchedule",
    "Attenuation",
    "MixingPrediction",
    "beta_at",
    "betas",
    "attenuation",
    "j_values",
    "marginal_params",
    "snr",
    "snr_of_attenuation",
    "predict_mixing_step",
]


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear beta schedule with discrete horizon T."""

    beta0: float = 1e-4
    betaT: float = 0.02
    horizon_T: int = 1000
    kind: str = "linear"

    def __post_init__(self) -> None:
        if self.kind != "linear":
            raise DomainError(f"unsupported schedule kind {self.kind!r}")
        if not (0.0 < self.beta0 <= self.betaT < 1.0):
            raise DomainError(
                f"need 0 < beta0 <= betaT < 1, got ({self.beta0}, {self.betaT})"
            )
        if self.horizon_T < 1:
            raise DomainError(f"horizon_T must be >= 1, got {self.horizon_T}")

    @classmethod
    def ddpm_default(cls) -> "NoiseSchedule":
        return cls(beta0=1e-4, betaT=0.02, horizon_T=1000)

    def to_dict(self) -> dict:
        return {"beta0": self.beta0, "betaT": self.betaT, "T": self.horizon_T}


@dataclass(frozen=True)
class Attenuation:
    """Surviving signal fraction J at a given step."""

    j_value: float
    step: float


@dataclass(frozen=True)
class MixingPrediction:
    """Analytic epsilon-mixing step for sub-Gaussian data of dimension d."""

    t_mix_steps: float
    t_mix_fraction: float
    dim: int


def beta_at(schedule: NoiseSchedule, t: int) -> float:
    """Discrete beta_t, linearly interpolated over steps 1..T."""
    if not 1 <= t <= schedule.horizon_T:
        raise DomainError(f"step {t} outside [1, {schedule.horizon_T}]")
    if schedule.horizon_T == 1:
        return schedule.beta0
    frac = (t - 1) / (schedule.horizon_T - 1)
    return schedule.beta0 + (schedule.betaT - schedule.beta0) * frac


def betas(schedule: NoiseSchedule) -> np.ndarray:
    """All discrete beta_t for t = 1..T as an array."""
    T = schedule.horizon_T
    if T == 1:
        return np.array([schedule.beta0])
    steps = np.arange(1, T + 1, dtype=np.float64)
    return schedule.beta0 + (schedule.betaT - schedule.beta0) * (steps - 1) / (T - 1)


def _beta_integral(schedule: NoiseSchedule, t) -> np.ndarray:
    """int_0^t beta(s) ds for the continuous linear schedule."""
    t = np.asarray(t, dtype=np.float64)
    dbeta = schedule.betaT - schedule.beta0
    return schedule.beta0 * t + 0.5 * dbeta * t * t / schedule.horizon_T


def j_values(schedule: NoiseSchedule, t, mode: str = "continuous_integral") -> np.ndarray:
    """Attenuation J(t), vectorized over t.

    continuous_integral: exp(-1/2 int beta), exact for the linear schedule.
    discrete_product: prod_{i<=t} sqrt(1 - beta_i) from the DDPM update
    (integer t only).
    """
    if mode == "continuous_integral":
        return np.exp(-0.5 * _beta_integral(schedule, t))
    if mode == "discrete_product":
        cum = np.concatenate([[1.0], np.cumprod(np.sqrt(1.0 - betas(schedule)))])
        idx = np.asarray(t, dtype=np.int64)
        if np.any(idx < 0) or np.any(idx > schedule.horizon_T):
            raise DomainError("step outside [0, horizon_T]")
        return cum[idx]
    raise DomainError(f"unknown attenuation mode {mode!r}")


def attenuation(schedule: NoiseSchedule, t, mode: str = "continuous_integral") -> Attenuation:
    if not 0 <= t <= schedule.horizon_T:
        raise DomainError(f"step {t} outside [0, {schedule.horizon_T}]")
    j = float(j_values(schedule, t, mode=mode))
    return Attenuation(j_value=j, step=float(t))


def marginal_params(schedule: NoiseSchedule, t, mode: str = "continuous_integral"):
    """(mean_scale, noise_variance) of the closed-form marginal at step t.

    mean_scale^2 + noise_variance = 1 holds bit-exactly.
    """
    j = attenuation(schedule, t, mode=mode).j_value
    return j, 1.0 - j * j


def snr_of_attenuation(j: float) -> float:
    """SNR = J^2 / (1 - J^2); +inf at J = 1."""
    j2 = j * j
    if j2 >= 1.0:
        return math.inf
    return j2 / (1.0 - j2)


def snr(schedule: NoiseSchedule, t, mode: str = "continuous_integral") -> float:
    return snr_of_attenuation(attenuation(schedule, t, mode=mode).j_value)


def predict_mixing_step(schedule: NoiseSchedule, dim: int) -> MixingPrediction:
    """Analytic mixing step for sub-Gaussian data in dimension d.

    Solves (beta0/2) t + (betaT - beta0) t^2 / (4 T) = log(d/2) / 4,
    the quadratic whose DDPM-default form is t + 0.0995 t^2 = 5000 log(d/2).
    """
    if dim < 3:
        raise DomainError(f"dim must be >= 3 so that log(d/2) > 0, got {dim}")
    rhs = 0.25 * math.log(dim / 2.0)
    a = (schedule.betaT - schedule.beta0) / (4.0 * schedule.horizon_T)
    b = 0.5 * schedule.beta0
    if a == 0.0:
        t = rhs / b
    else:
        # stable positive root of a t^2 + b t - rhs = 0
        t = 2.0 * rhs / (b + math.sqrt(b * b + 4.0 * a * rhs))
    for _ in range(3):  # Newton polish to push the residual below 1e-9
        f = a * t * t + b * t - rhs
        t -= f / (2.0 * a * t + b)
    return MixingPrediction(
        t_mix_steps=t, t_mix_fraction=t / schedule.horizon_T, dim=dim
    )
