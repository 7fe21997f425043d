"""Merger detection, cascades, guidance windows, and related observables.

Two class events merge at the first step where the distance between
their conditional moment statistics falls to a threshold eps; from that
step on the thresholded similarity is pinned to exactly 1 (a first
merger is sticky).  Distances:

* top_eigen_abs: |lambda_max(Sigma_a) - lambda_max(Sigma_b)|, the
  eigenvalue proxy (covariance spectra collapse toward identity under
  the VP flow, so the top eigenvalues govern the merger).
* trace_l1: |F_a - F_b| with F the squared Hilbert norm of the
  conditional tensor, i.e. the trace Tr(Sigma^T Sigma) when n = 2.

In the default analytic mode, step-0 moments are pushed through the
marginal law (lambda(t) = lambda(0) J^2 + 1 - J^2 and its trace
analogue), which makes the first-merge step exact at integer resolution
whatever step grid the sweep carries, and keeps a K-class scan on tens
of thousands of samples in the sub-second range.  mode="empirical"
recomputes moments from the stochastic snapshots instead.

The default threshold is eps = max_k lambda_k_max(0) / 400.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .data import EventPartition
from .errors import DegenerateError, DomainError
from .fluctuation import ConditionalMoments, conditional_fluctuation, normalized_M
from .forward import TrajectorySweep
from .schedule import NoiseSchedule, betas, j_values

__all__ = [
    "MergerSeries",
    "CascadeLeaf",
    "CascadeNode",
    "MergerCascade",
    "GuidanceWindow",
    "EtaSchedule",
    "default_epsilon",
    "detect_series",
    "pairwise_merge_times",
    "build_cascade",
    "guidance_windows",
    "interpolation_schedule",
    "lattice_jump",
    "phase_spectrum",
]


@dataclass(frozen=True)
class MergerSeries:
    """Thresholded similarity per step for one event pair, plus i*."""

    pair: tuple
    steps: tuple
    values: np.ndarray
    first_merge_step: int
    epsilon: float
    metric: str
    order: int


@dataclass(frozen=True)
class CascadeLeaf:
    class_id: int

    def to_dict(self) -> dict:
        return {"class": self.class_id}


@dataclass(frozen=True)
class CascadeNode:
    merge_step: int
    left: object
    right: object

    def to_dict(self) -> dict:
        return {"step": self.merge_step,
                "children": [self.left.to_dict(), self.right.to_dict()]}


@dataclass(frozen=True)
class MergerCascade:
    """Single-linkage dendrogram over class events; heights are merge steps."""

    root: object
    n_classes: int

    def internal_nodes(self) -> list:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, CascadeNode):
                out.append(node)
                stack.extend([node.left, node.right])
        return out

    def to_dict(self) -> dict:
        return self.root.to_dict()


@dataclass(frozen=True)
class GuidanceWindow:
    """Per-class guidance interval; t_end <= t_start in forward time.

    t_start is the global convergence index, t_end the class's first
    merge step (guidance belongs between them).  A class whose first
    merge falls after the convergence index gets an empty window and
    the never_merged flag.
    """

    class_id: int
    t_end: int
    t_start: int
    never_merged: bool

    def to_dict(self) -> dict:
        return {"class": self.class_id, "t_end": self.t_end,
                "t_start": self.t_start, "never_merged": self.never_merged,
                "t_merge": self.t_end, "t_conv": self.t_start}


@dataclass(frozen=True)
class EtaSchedule:
    """Exemplar-interpolation schedule eta_t = s * beta_t / max_u beta_u."""

    eta: np.ndarray
    scale: float
    warning: str | None = None


def default_epsilon(moments0) -> float:
    """eps = max over classes of lambda_max at step 0, divided by 400."""
    tops = [m.top_eigenvalue for m in moments0]
    if not tops or max(tops) <= 0.0:
        raise DegenerateError("all step-0 covariances are degenerate")
    return max(tops) / 400.0


def _metric_scalars(m: ConditionalMoments, metric: str) -> tuple:
    """(distance statistic at 0, trace, frobenius_sq) used in propagation."""
    if metric == "top_eigen_abs":
        stat = m.top_eigenvalue
    elif metric == "trace_l1":
        stat = m.frobenius_sq
    else:
        raise DomainError(f"unknown metric {metric!r}")
    trace = float(np.trace(m.tensor)) if m.order == 2 else float(m.tensor.sum())
    return stat, trace, m.frobenius_sq


def _propagated_distance(schedule: NoiseSchedule, ts: np.ndarray, metric: str,
                         n: int, ma: ConditionalMoments, mb: ConditionalMoments) -> np.ndarray:
    """Distance series on integer steps ts under exact moment propagation."""
    j2 = j_values(schedule, ts) ** 2
    d = ma.dim
    if n == 1:
        # tensors scale by J; both metrics reduce to J-powers of step-0 stats
        jn = np.sqrt(j2)
        if metric == "top_eigen_abs":
            return jn * abs(ma.top_eigenvalue - mb.top_eigenvalue)
        return j2 * abs(ma.frobenius_sq - mb.frobenius_sq)
    if metric == "top_eigen_abs":
        return j2 * abs(ma.top_eigenvalue - mb.top_eigenvalue)
    # ||J^2 A + (1-J^2) I||_F^2 = J^4 ||A||^2 + 2 J^2 (1-J^2) tr A + d (1-J^2)^2
    fa = j2**2 * ma.frobenius_sq + 2 * j2 * (1 - j2) * np.trace(ma.tensor) + d * (1 - j2) ** 2
    fb = j2**2 * mb.frobenius_sq + 2 * j2 * (1 - j2) * np.trace(mb.tensor) + d * (1 - j2) ** 2
    return np.abs(fa - fb)


def _propagated_cka(schedule: NoiseSchedule, ts: np.ndarray,
                    ma: ConditionalMoments, mb: ConditionalMoments, n: int) -> np.ndarray:
    """normalized_M along integer steps from step-0 moments (n = 2 closed form)."""
    j2 = j_values(schedule, ts) ** 2
    if n == 1:
        g0 = float(np.sum(ma.tensor * mb.tensor))
        denom = np.sqrt(ma.frobenius_sq * mb.frobenius_sq)
        if denom == 0.0:
            raise DegenerateError("normalized_M undefined for a zero-norm tensor")
        return np.full_like(j2, min(abs(g0) / denom, 1.0))
    d = ma.dim
    tra, trb = np.trace(ma.tensor), np.trace(mb.tensor)
    g0 = float(np.sum(ma.tensor * mb.tensor))
    g = j2**2 * g0 + j2 * (1 - j2) * (tra + trb) + d * (1 - j2) ** 2
    fa = j2**2 * ma.frobenius_sq + 2 * j2 * (1 - j2) * tra + d * (1 - j2) ** 2
    fb = j2**2 * mb.frobenius_sq + 2 * j2 * (1 - j2) * trb + d * (1 - j2) ** 2
    bad = (fa <= 0) | (fb <= 0)
    if np.any(bad):
        raise DegenerateError(
            f"zero-norm tensor at step {int(np.asarray(ts)[bad][0])}"
        )
    return np.minimum(np.abs(g) / np.sqrt(fa * fb), 1.0)


def detect_series(sweep: TrajectorySweep, a, b, n: int = 2,
                  epsilon: float | None = None, metric: str = "top_eigen_abs",
                  centering: str = "conditional_mean",
                  mode: str = "analytic") -> MergerSeries:
    """Thresholded similarity series and first merger step for events a, b.

    Per step: the normalized cross-fluctuation while the metric distance
    exceeds epsilon, exactly 1 otherwise; i* is the first step of the 1
    branch and is sticky.  Events merge no later than the horizon.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        raise DomainError("events must be non-empty")
    if np.intersect1d(a, b).size:
        raise DomainError("events must be disjoint")
    horizon = sweep.horizon

    ma0 = conditional_fluctuation(sweep, a, 0, n=n, centering=centering, propagate=True)
    mb0 = conditional_fluctuation(sweep, b, 0, n=n, centering=centering, propagate=True)
    if epsilon is None:
        epsilon = default_epsilon([ma0, mb0])
    if epsilon <= 0.0:
        raise DomainError("epsilon must be positive")

    grid = np.asarray(sweep.steps, dtype=np.int64)
    if mode == "analytic":
        all_t = np.arange(0, horizon + 1)
        dist = _propagated_distance(sweep.schedule, all_t, metric, n, ma0, mb0)
        merged = dist <= epsilon
        istar = int(all_t[merged][0]) if merged.any() else horizon
        values = _propagated_cka(sweep.schedule, grid, ma0, mb0, n)
        values = np.where(grid >= istar, 1.0, values)
    elif mode == "empirical":
        values = np.empty(len(grid))
        istar = horizon
        for i, t in enumerate(grid):
            if t >= istar:
                values[i] = 1.0
                continue
            try:
                mat = conditional_fluctuation(sweep, a, int(t), n=n,
                                              centering=centering, propagate=False)
                mbt = conditional_fluctuation(sweep, b, int(t), n=n,
                                              centering=centering, propagate=False)
            except DegenerateError as exc:
                raise DegenerateError(f"step {int(t)}: {exc}") from None
            da, _, _ = _metric_scalars(mat, metric)
            db, _, _ = _metric_scalars(mbt, metric)
            if abs(da - db) <= epsilon:
                istar = int(t)
                values[i] = 1.0
            else:
                values[i] = normalized_M(mat, mbt)
    else:
        raise DomainError(f"unknown mode {mode!r}")

    if grid[-1] == horizon:
        values[-1] = 1.0  # white noise merges everything by fiat
    return MergerSeries(
        pair=(_pair_id(a), _pair_id(b)), steps=tuple(int(t) for t in grid),
        values=values, first_merge_step=istar, epsilon=float(epsilon),
        metric=metric, order=n,
    )


def _pair_id(event: np.ndarray):
    return (int(event[0]), int(event.size))


def pairwise_merge_times(sweep: TrajectorySweep, partition: EventPartition,
                         n: int = 2, epsilon: float | None = None,
                         metric: str = "top_eigen_abs",
                         mode: str = "analytic") -> np.ndarray:
    """K x K symmetric matrix of first merger steps; zero diagonal."""
    k = partition.n_events
    if k < 2:
        raise DomainError("need at least two events")
    moments0 = [
        conditional_fluctuation(sweep, ev, 0, n=n, propagate=True)
        for ev in partition.events
    ]
    if epsilon is None:
        epsilon = default_epsilon(moments0)
    out = np.zeros((k, k), dtype=np.int64)
    for i in range(k):
        for j in range(i + 1, k):
            series = detect_series(
                sweep, partition.events[i], partition.events[j], n=n,
                epsilon=epsilon, metric=metric, mode=mode,
            )
            out[i, j] = out[j, i] = series.first_merge_step
    return out


def build_cascade(merge_times: np.ndarray) -> MergerCascade:
    """Single-linkage agglomeration with merge times as the dissimilarity.

    Heights are non-decreasing toward the root (single linkage is
    ultrametric-safe).  Ties break on the smallest involved class ids
    so the tree is deterministic.
    """
    mt = np.asarray(merge_times, dtype=np.float64)
    if mt.ndim != 2 or mt.shape[0] != mt.shape[1]:
        raise DomainError("merge_times must be a square matrix")
    if not np.allclose(mt, mt.T):
        raise DomainError("merge_times must be symmetric")
    if np.any(mt < 0):
        raise DomainError("merge_times must be non-negative")
    k = mt.shape[0]
    if k == 1:
        return MergerCascade(root=CascadeLeaf(0), n_classes=1)

    nodes = {i: CascadeLeaf(i) for i in range(k)}
    members = {i: [i] for i in range(k)}
    active = list(range(k))
    while len(active) > 1:
        best = None
        for ai in range(len(active)):
            for bi in range(ai + 1, len(active)):
                ca, cb = active[ai], active[bi]
                d = mt[np.ix_(members[ca], members[cb])].min()
                lo, hi = sorted((min(members[ca]), min(members[cb])))
                key = (d, lo, hi)
                if best is None or key < best[0]:
                    best = (key, ca, cb)
        (d, _, _), ca, cb = best
        lo, hi = (ca, cb) if min(members[ca]) < min(members[cb]) else (cb, ca)
        nodes[lo] = CascadeNode(merge_step=int(round(d)), left=nodes[lo], right=nodes[hi])
        members[lo] = members[lo] + members[hi]
        active.remove(hi)
        del nodes[hi], members[hi]
    return MergerCascade(root=nodes[active[0]], n_classes=k)


def guidance_windows(merge_times: np.ndarray, istar: int, horizon: int) -> list:
    """Per-class (t_end, t_start) with t_end the first merge, t_start = i*."""
    if not 0 <= istar <= horizon:
        raise DomainError(f"istar {istar} outside [0, {horizon}]")
    mt = np.asarray(merge_times)
    k = mt.shape[0]
    out = []
    for c in range(k):
        others = [mt[c, j] for j in range(k) if j != c]
        t_merge = int(min(others)) if others else horizon
        if t_merge > istar:
            out.append(GuidanceWindow(class_id=c, t_end=istar, t_start=istar,
                                      never_merged=True))
        else:
            out.append(GuidanceWindow(class_id=c, t_end=t_merge, t_start=istar,
                                      never_merged=False))
    return out


_ETA_BAND = (1e-4, 1e-2)


def interpolation_schedule(schedule: NoiseSchedule, s: float) -> EtaSchedule:
    """eta_t = s * beta_t / max_u beta_u for t = 1..T."""
    if not 0.0 < s <= 1.0:
        raise DomainError(f"scale s must lie in (0, 1], got {s}")
    warning = None
    if not _ETA_BAND[0] <= s <= _ETA_BAND[1]:
        warning = (
            f"scale {s} outside the search band [{_ETA_BAND[0]}, {_ETA_BAND[1]}]; "
            "larger values degrade sharpness"
        )
    b = betas(schedule)
    return EtaSchedule(eta=s * b / b.max(), scale=float(s), warning=warning)


def lattice_jump(series, tau: int = 1, order: int = 1,
                 eps_disc: float = 1e-3) -> list:
    """Interior indices where left/right order-n finite differences split.

    Left difference at t spans [t - n tau, t], right spans [t, t + n tau];
    both are normalized by tau^n.  An ideal unit step therefore flags the
    jump index and the index tau before it (both windows straddle it).
    """
    phi = np.asarray(series, dtype=np.float64)
    if tau < 1 or order < 1:
        raise DomainError("tau and order must be >= 1")
    if eps_disc <= 0.0:
        raise DomainError("eps_disc must be positive")
    L = phi.shape[0]
    if L < 2 * order * tau + 1:
        raise DomainError(
            f"sequence of length {L} too short for order {order}, tau {tau}"
        )
    coeff = np.array([(-1) ** j * comb(order, j) for j in range(order + 1)])
    out = []
    for t in range(order * tau, L - order * tau):
        left = sum(coeff[j] * phi[t - j * tau] for j in range(order + 1))
        right = sum(coeff[j] * phi[t + (order - j) * tau] for j in range(order + 1))
        if abs(left - right) / tau**order >= eps_disc:
            out.append(t)
    return out


def phase_spectrum(sweep: TrajectorySweep, partition: EventPartition,
                   n: int = 2, metric: str = "top_eigen_abs",
                   epsilon_grid=(), mode: str = "analytic") -> list:
    """Count of positive-step merger events in the cascade, per epsilon."""
    eps_grid = [float(e) for e in epsilon_grid]
    if not eps_grid:
        raise DomainError("epsilon grid is empty")
    if any(e <= 0 for e in eps_grid) or any(
        b <= a for a, b in zip(eps_grid, eps_grid[1:])
    ):
        raise DomainError("epsilon grid must be positive and increasing")
    counts = []
    for eps in eps_grid:
        mt = pairwise_merge_times(sweep, partition, n=n, epsilon=eps,
                                  metric=metric, mode=mode)
        cascade = build_cascade(mt)
        counts.append(sum(1 for nd in cascade.internal_nodes() if nd.merge_step > 0))
    return counts
