"""Empirical forward diffusion: marginal noising and one-sweep trajectories.

The default noising path is the closed-form marginal
    x_t = J(t) x_0 + sqrt(1 - J(t)^2) eps,
which is exact and O(1) per (sample, step); the stepwise DDPM update is
kept for validation.  Noise is counter-based: every step draws from a
Philox stream keyed by (base_seed, tag, step), so a sweep regenerates
bit-identically from (dataset, schedule, steps, seed) and is independent
of how work is scheduled across steps.

One-sweep property: all snapshots of a TrajectorySweep come from the same
x_0 rows, so event membership fixed at step 0 indexes the same
trajectories at every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .errors import DomainError
from .schedule import NoiseSchedule, beta_at, j_values

__all__ = ["SeedPolicy", "TrajectorySweep", "noised_at", "step_ddpm", "sweep"]

_TAG_MARGINAL = 0
_TAG_DDPM = 1
_TAG_SHARED = 2


@dataclass(frozen=True)
class SeedPolicy:
    """Counter-based noise derivation from a single 64-bit base seed.

    shared_path=True reuses one eps per sample across all steps (a
    path-coupled sweep); the default draws fresh noise per (sample, step).
    """

    base_seed: int
    shared_path: bool = False

    def _stream(self, tag: int, step: int) -> np.random.Generator:
        key = np.array(
            [np.uint64(self.base_seed & 0xFFFFFFFFFFFFFFFF),
             np.uint64((tag << 48) | step)],
            dtype=np.uint64,
        )
        return np.random.Generator(np.random.Philox(key=key))

    def noise(self, n: int, d: int, step: int, tag: int = _TAG_MARGINAL) -> np.ndarray:
        if self.shared_path and tag == _TAG_MARGINAL:
            return self._stream(_TAG_SHARED, 0).standard_normal((n, d))
        return self._stream(tag, step).standard_normal((n, d))


def _features(ds) -> np.ndarray:
    return ds.features if isinstance(ds, LabeledDataset) else np.asarray(ds, dtype=np.float64)


def noised_at(ds, schedule: NoiseSchedule, t: int, seeds: SeedPolicy) -> np.ndarray:
    """Closed-form marginal snapshot J(t) x0 + sqrt(1 - J^2) eps."""
    if not 0 <= t <= schedule.horizon_T:
        raise DomainError(f"step {t} outside [0, {schedule.horizon_T}]")
    x0 = _features(ds)
    if t == 0:
        return x0.copy()
    j = float(j_values(schedule, t))
    sigma = np.sqrt(1.0 - j * j)
    return j * x0 + sigma * seeds.noise(x0.shape[0], x0.shape[1], t)


def step_ddpm(x_prev: np.ndarray, schedule: NoiseSchedule, t: int, seeds: SeedPolicy) -> np.ndarray:
    """Single DDPM update x_t = sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) eps."""
    beta = beta_at(schedule, t)
    x_prev = np.asarray(x_prev, dtype=np.float64)
    eps = seeds.noise(x_prev.shape[0], x_prev.shape[1], t, tag=_TAG_DDPM)
    return np.sqrt(1.0 - beta) * x_prev + np.sqrt(beta) * eps


@dataclass(frozen=True)
class TrajectorySweep:
    """One coherent set of forward trajectories, snapshots by step.

    Snapshots are regenerated on demand from the counter-based seeds
    rather than held resident, so memory stays bounded at one N x d
    matrix regardless of len(steps); regeneration is bit-identical.
    """

    dataset: LabeledDataset
    schedule: NoiseSchedule
    steps: tuple
    seeds: SeedPolicy

    def snapshot(self, t: int) -> np.ndarray:
        if t not in self.steps:
            raise DomainError(f"step {t} not in sweep steps")
        return noised_at(self.dataset, self.schedule, t, self.seeds)

    @property
    def horizon(self) -> int:
        return self.schedule.horizon_T


def sweep(ds: LabeledDataset, schedule: NoiseSchedule, steps, seeds: SeedPolicy) -> TrajectorySweep:
    steps = tuple(int(s) for s in steps)
    if not steps:
        raise DomainError("step list is empty")
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise DomainError("steps must be strictly increasing")
    if steps[0] < 0 or steps[-1] > schedule.horizon_T:
        raise DomainError(f"steps must lie in [0, {schedule.horizon_T}]")
    return TrajectorySweep(dataset=ds, schedule=schedule, steps=steps, seeds=seeds)
