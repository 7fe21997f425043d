"""Linear probes through the forward chain, and step-weight laws.

A probe is a bias-augmented linear logistic classifier trained by
full-batch gradient descent (fixed 500 iterations, step 0.1) on inputs
standardized with train-split statistics.  Probing stops at the pair's
merge step: beyond it the two events are statistically
indistinguishable and accuracy is undefined.

Weight laws distribute unit mass over a step window: uniform,
proportional to 1/SNR(t) (zero weight at t = 0, where SNR is infinite),
or the truncated variant that additionally zeroes steps below a floor
(default 20).  Aggregation averages per-step class softmaxes under a
law; the per-step scores come from an external file, no model runs here.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError
from .forward import TrajectorySweep
from .schedule import NoiseSchedule, snr

__all__ = [
    "ProbeResult",
    "WeightLaw",
    "train_linear_probe",
    "probe_through_time",
    "weight_law",
    "weighted_score_aggregate",
    "load_logits_csv",
]

GD_ITERATIONS = 500
GD_STEP = 0.1
TRUNCATION_FLOOR = 20


@dataclass(frozen=True)
class ProbeResult:
    steps: tuple
    accuracies: tuple        # nan where undefined
    defined: tuple
    split: float
    seed: int
    merge_step: int


@dataclass(frozen=True)
class WeightLaw:
    kind: str
    t_start: int
    t_stop: int
    floor: int
    steps: tuple
    weights: np.ndarray

    def weight_at(self, t: int) -> float:
        try:
            return float(self.weights[self.steps.index(t)])
        except ValueError:
            return 0.0


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def train_linear_probe(feats_a: np.ndarray, feats_b: np.ndarray,
                       split: float = 0.8, seed: int = 0) -> float:
    """Held-out accuracy of a logistic probe separating the two samples."""
    feats_a = np.asarray(feats_a, dtype=np.float64)
    feats_b = np.asarray(feats_b, dtype=np.float64)
    if feats_a.ndim == 1:
        feats_a = feats_a[:, None]
    if feats_b.ndim == 1:
        feats_b = feats_b[:, None]
    if feats_a.shape[0] < 10 or feats_b.shape[0] < 10:
        raise DomainError("each class needs at least 10 samples")
    if not 0.0 < split < 1.0:
        raise DomainError(f"split fraction must lie in (0, 1), got {split}")

    x = np.vstack([feats_a, feats_b])
    y = np.concatenate([np.zeros(len(feats_a)), np.ones(len(feats_b))])
    rng = np.random.Generator(
        np.random.Philox(key=np.array([seed, 0xB0BE], dtype=np.uint64))
    )
    order = rng.permutation(len(x))
    n_train = int(round(split * len(x)))
    if n_train < 1 or n_train >= len(x):
        raise DomainError("split leaves an empty train or test set")
    tr, te = order[:n_train], order[n_train:]

    mu = x[tr].mean(axis=0)
    sd = x[tr].std(axis=0)
    sd[sd == 0.0] = 1.0
    xs = (x - mu) / sd
    xa = np.hstack([xs, np.ones((len(xs), 1))])

    w = np.zeros(xa.shape[1])
    for _ in range(GD_ITERATIONS):
        p = _sigmoid(xa[tr] @ w)
        w -= GD_STEP * (xa[tr].T @ (p - y[tr])) / len(tr)
    pred = (xa[te] @ w) > 0.0
    return float(np.mean(pred == y[te]))


def probe_through_time(sweep: TrajectorySweep, a, b, merge_step: int,
                       split: float = 0.8, seed: int = 0) -> ProbeResult:
    """Probe accuracy at every sweep step strictly below the merge step."""
    if merge_step > sweep.horizon:
        raise DomainError(f"merge_step {merge_step} beyond horizon {sweep.horizon}")
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    steps, accs, defined = [], [], []
    for t in sweep.steps:
        steps.append(int(t))
        if t < merge_step:
            snap = sweep.snapshot(t)
            accs.append(train_linear_probe(snap[a], snap[b], split=split, seed=seed))
            defined.append(True)
        else:
            accs.append(float("nan"))
            defined.append(False)
    return ProbeResult(steps=tuple(steps), accuracies=tuple(accs),
                       defined=tuple(defined), split=split, seed=seed,
                       merge_step=merge_step)


def weight_law(kind: str, schedule: NoiseSchedule, t_start: int, t_stop: int,
               floor: int = TRUNCATION_FLOOR) -> WeightLaw:
    """Normalized step weights on [t_start, t_stop] for the given law."""
    if t_start > t_stop:
        raise DomainError(f"empty window [{t_start}, {t_stop}]")
    if t_start < 0 or t_stop > schedule.horizon_T:
        raise DomainError("window outside [0, horizon_T]")
    steps = np.arange(t_start, t_stop + 1)
    if kind == "uniform":
        w = np.ones(len(steps))
    elif kind in ("inverse_snr", "truncated_inverse_snr"):
        w = np.array([
            0.0 if t == 0 else 1.0 / snr(schedule, int(t)) for t in steps
        ])
        if kind == "truncated_inverse_snr":
            w[steps < floor] = 0.0
    else:
        raise DomainError(f"unknown weight law {kind!r}")
    total = w.sum()
    if total <= 0.0:
        raise DomainError("weight law has empty support on this window")
    return WeightLaw(kind=kind, t_start=int(t_start), t_stop=int(t_stop),
                     floor=int(floor), steps=tuple(int(t) for t in steps),
                     weights=w / total)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    ez = np.exp(z)
    return ez / ez.sum()


def weighted_score_aggregate(per_step_scores, law: WeightLaw) -> np.ndarray:
    """Weight-averaged softmax over steps: sum_t w(t) softmax(scores_t).

    per_step_scores maps step -> length-K logit vector; every step with
    positive weight must be present.
    """
    out = None
    for t, w in zip(law.steps, law.weights):
        if w == 0.0:
            continue
        if t not in per_step_scores:
            raise DomainError(f"missing scores for step {t} (weight {w})")
        probs = _softmax(np.asarray(per_step_scores[t], dtype=np.float64))
        out = w * probs if out is None else out + w * probs
    return out


def load_logits_csv(path) -> dict:
    """Read step,class,logit rows into {step: length-K logit vector}."""
    rows = []
    with open(path) as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            if len(rec) != 3:
                raise DataError(f"row {lineno}: expected step,class,logit")
            try:
                rows.append((int(rec[0]), int(rec[1]), float(rec[2])))
            except ValueError as exc:
                raise DataError(f"row {lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path} contains no logit rows")
    n_classes = max(c for _, c, _ in rows) + 1
    out: dict = {}
    for t, c, v in rows:
        vec = out.setdefault(t, np.full(n_classes, np.nan))
        vec[c] = v
    for t, vec in out.items():
        if np.any(np.isnan(vec)):
            raise DataError(f"step {t} is missing some class logits")
    return out
