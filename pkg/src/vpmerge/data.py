"""Datasets, class-event partitions, and synthetic Gaussian mixtures.

Features are stored as float64 regardless of file precision so that
covariance accumulation stays accurate.  Labels are remapped to the
contiguous range 0..K-1 on construction; the original labels are kept
in ``label_map``.

File formats
------------
CSV: one record per line, first field an integer label, remaining d
fields decimal reals; optional leading header lines starting with '#'.

fvec1 (little-endian binary): 5 magic bytes ``FVEC1``, uint64 N,
uint64 d, then N records of [uint32 label, d x float32 features].
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DomainError

__all__ = [
    "LabeledDataset",
    "EventPartition",
    "SyntheticSpec",
    "load_dataset",
    "save_dataset",
    "partition_by_label",
    "synth_gaussian_mixture",
    "standardize",
]

_FVEC1_MAGIC = b"FVEC1"


@dataclass(frozen=True)
class LabeledDataset:
    """N x d feature matrix with contiguous integer labels."""

    features: np.ndarray
    labels: np.ndarray
    label_map: dict = field(default_factory=dict)  # contiguous -> original

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if feats.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {feats.shape}")
        if labels.shape != (feats.shape[0],):
            raise DataError(
                f"labels shape {labels.shape} does not match {feats.shape[0]} rows"
            )
        if feats.size and not np.all(np.isfinite(feats)):
            raise DataError("features contain non-finite values")
        if feats.shape[0] == 0:
            raise DataError("dataset is empty")
        if np.any(labels < 0):
            raise DataError("labels must be non-negative integers")
        uniq = np.unique(labels)
        if not np.array_equal(uniq, np.arange(len(uniq))):
            remap = {int(orig): new for new, orig in enumerate(uniq)}
            labels = np.array([remap[int(v)] for v in labels], dtype=np.int64)
            object.__setattr__(
                self, "label_map", {new: int(orig) for new, orig in enumerate(uniq)}
            )
        elif not self.label_map:
            object.__setattr__(
                self, "label_map", {int(v): int(v) for v in uniq}
            )
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels.astype(np.int64))
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def count(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class EventPartition:
    """Disjoint, exhaustive index lists, one per class event."""

    events: tuple
    class_probs: np.ndarray

    def __post_init__(self) -> None:
        total = sum(len(e) for e in self.events)
        joined = np.concatenate([np.asarray(e) for e in self.events])
        if len(np.unique(joined)) != total:
            raise DataError("partition events overlap")
        if not np.array_equal(np.sort(joined), np.arange(total)):
            raise DataError("partition events do not cover the index set")
        probs = np.asarray(self.class_probs, dtype=np.float64)
        if abs(probs.sum() - 1.0) > 1e-12:
            raise DataError("class probabilities must sum to 1")
        object.__setattr__(self, "class_probs", probs)

    @property
    def n_events(self) -> int:
        return len(self.events)


def partition_by_label(ds: LabeledDataset) -> EventPartition:
    """One event per distinct label, with empirical class probabilities."""
    k = ds.n_classes
    events = tuple(np.flatnonzero(ds.labels == c) for c in range(k))
    probs = np.array([len(e) / ds.count for e in events])
    return EventPartition(events=events, class_probs=probs)


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian mixture: per class a mean, a covariance spectrum, a rotation.

    Class k is sampled from N(mean_k, Q_k diag(spectrum_k) Q_k^T) with Q_k a
    seeded orthogonal matrix.  Spectra must be non-negative and non-increasing.
    """

    means: np.ndarray  # (K, d)
    spectra: np.ndarray  # (K, d)
    samples_per_class: tuple
    rotation_seeds: tuple = ()

    def __post_init__(self) -> None:
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        spectra = np.atleast_2d(np.asarray(self.spectra, dtype=np.float64))
        if means.shape != spectra.shape:
            raise DomainError("means and spectra must have matching shapes")
        if means.shape[0] < 1:
            raise DomainError("need at least one class")
        if np.any(spectra < 0):
            raise DomainError("spectra must be non-negative")
        if np.any(np.diff(spectra, axis=1) > 1e-12):
            raise DomainError("spectra must be non-increasing")
        counts = tuple(int(c) for c in np.atleast_1d(self.samples_per_class))
        if len(counts) == 1:
            counts = counts * means.shape[0]
        if len(counts) != means.shape[0] or any(c < 1 for c in counts):
            raise DomainError("samples_per_class must give a positive count per class")
        rots = tuple(self.rotation_seeds) or tuple(range(means.shape[0]))
        if len(rots) != means.shape[0]:
            raise DomainError("rotation_seeds must give one seed per class")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "spectra", spectra)
        object.__setattr__(self, "samples_per_class", counts)
        object.__setattr__(self, "rotation_seeds", rots)

    @property
    def n_classes(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def _class_rng(seed: int, tag: int) -> np.random.Generator:
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(tag)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _rotation(seed: int, class_index: int, rotation_seed: int, d: int) -> np.ndarray:
    rng = _class_rng(seed, (1 << 32) | (rotation_seed << 8) | class_index)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def synth_gaussian_mixture(spec: SyntheticSpec, seed: int) -> LabeledDataset:
    """Sample the mixture; deterministic given the seed.

    Each class draws from its own counter-based stream, so generating
    classes in parallel equals generating them serially.
    """
    blocks, labels = [], []
    for k in range(spec.n_classes):
        n_k = spec.samples_per_class[k]
        rng = _class_rng(seed, k)
        q = _rotation(seed, k, spec.rotation_seeds[k], spec.dim)
        z = rng.standard_normal((n_k, spec.dim))
        x = (z * np.sqrt(spec.spectra[k])) @ q.T + spec.means[k]
        blocks.append(x)
        labels.append(np.full(n_k, k, dtype=np.int64))
    return LabeledDataset(
        features=np.vstack(blocks), labels=np.concatenate(labels)
    )


def standardize(ds: LabeledDataset, mode: str = "global_unit_variance") -> LabeledDataset:
    """Subtract the global mean and scale each coordinate to unit variance."""
    if mode == "none":
        return ds
    if mode != "global_unit_variance":
        raise DomainError(f"unknown standardize mode {mode!r}")
    mean = ds.features.mean(axis=0)
    std = ds.features.std(axis=0)
    bad = np.flatnonzero(std == 0.0)
    if bad.size:
        raise DataError(f"coordinate {int(bad[0])} has zero variance")
    return LabeledDataset(
        features=(ds.features - mean) / std,
        labels=ds.labels.copy(),
        label_map=dict(ds.label_map),
    )


def load_dataset(path, format: str | None = None) -> LabeledDataset:
    path = Path(path)
    fmt = format or ("fvec1" if path.suffix == ".fvec1" else "csv")
    if not path.exists():
        raise DataError(f"no such file: {path}")
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "fvec1":
        return _load_fvec1(path)
    raise DomainError(f"unknown dataset format {fmt!r}")


def save_dataset(ds: LabeledDataset, path, format: str | None = None) -> None:
    path = Path(path)
    fmt = format or ("fvec1" if path.suffix == ".fvec1" else "csv")
    if fmt == "csv":
        with open(path, "w") as fh:
            for label, row in zip(ds.labels, ds.features):
                fh.write(str(int(label)) + "," + ",".join(repr(float(v)) for v in row) + "\n")
    elif fmt == "fvec1":
        with open(path, "wb") as fh:
            fh.write(_FVEC1_MAGIC)
            fh.write(struct.pack("<QQ", ds.count, ds.dim))
            rec = np.empty(
                ds.count, dtype=np.dtype([("label", "<u4"), ("feat", "<f4", (ds.dim,))])
            )
            rec["label"] = ds.labels
            rec["feat"] = ds.features.astype(np.float32)
            fh.write(rec.tobytes())
    else:
        raise DomainError(f"unknown dataset format {fmt!r}")


def _load_csv(path: Path) -> LabeledDataset:
    labels, rows = [], []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
                if width < 2:
                    raise DataError(f"row {lineno}: need a label and at least one feature")
            elif len(parts) != width:
                raise DataError(
                    f"row {lineno}: expected {width} fields, got {len(parts)}"
                )
            try:
                labels.append(int(parts[0]))
                rows.append([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise DataError(f"row {lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path} contains no data rows")
    return LabeledDataset(features=np.array(rows), labels=np.array(labels))


def _load_fvec1(path: Path) -> LabeledDataset:
    raw = path.read_bytes()
    if len(raw) < 21 or raw[:5] != _FVEC1_MAGIC:
        raise DataError(f"{path} is not an fvec1 file")
    n, d = struct.unpack("<QQ", raw[5:21])
    rec_dtype = np.dtype([("label", "<u4"), ("feat", "<f4", (d,))])
    expected = 21 + n * rec_dtype.itemsize
    if len(raw) != expected:
        raise DataError(
            f"{path}: expected {expected} bytes for N={n}, d={d}, got {len(raw)}"
        )
    rec = np.frombuffer(raw[21:], dtype=rec_dtype)
    feats = rec["feat"].astype(np.float64)
    if feats.size and not np.all(np.isfinite(feats)):
        raise DataError(f"{path} contains non-finite features")
    return LabeledDataset(features=feats, labels=rec["label"].astype(np.int64))
