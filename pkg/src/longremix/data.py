"""Dataset construction, CSV ingestion, and synthetic label-noise injection.

Datasets carry the observed labels next to the hidden true labels and a
per-sample noise mask, so selection precision/recall can be measured
against ground truth. Noise injectors are pure: they return a new dataset
and never mutate their input.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ParseError, StateError

BLOB_RADIUS = 2.0


@dataclass
class NoisyDataset:
    features: np.ndarray      # (n, d) float
    labels: np.ndarray        # observed labels, (n,) int
    true_labels: np.ndarray   # hidden ground truth, (n,) int
    mask: np.ndarray          # (n,) bool, True where observed != true
    num_classes: int
    class_names: list | None = None  # CSV token map, first-appearance order

    def __post_init__(self):
        n = len(self.features)
        if not (len(self.labels) == len(self.true_labels) == len(self.mask) == n):
            raise ValueError("dataset arrays misaligned")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("observed label out of range")
        if n and (self.true_labels.min() < 0 or self.true_labels.max() >= self.num_classes):
            raise ValueError("true label out of range")
        if not np.array_equal(self.mask, self.labels != self.true_labels):
            raise ValueError("noise mask inconsistent with labels")

    @property
    def n(self) -> int:
        return len(self.features)

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    kind: str                 # "symmetric" | "asymmetric" | "none"
    eta: float = 0.0
    mapping: dict | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("symmetric", "asymmetric", "none"):
            raise ConfigError(f"unknown noise kind: {self.kind!r}")
        if self.kind == "symmetric" and not 0.0 <= self.eta < 1.0:
            raise ConfigError(f"symmetric noise rate must be in [0, 1), got {self.eta}")
        if self.kind == "asymmetric":
            if not 0.0 <= self.eta < 0.5:
                raise ConfigError(
                    f"asymmetric noise rate must be below the theoretical limit of 0.5, got {self.eta}")
            if not self.mapping:
                raise ConfigError("asymmetric noise needs a class mapping")
            for src, dst in self.mapping.items():
                if src == dst:
                    raise ConfigError(f"asymmetric mapping {src}->{dst} maps a class to itself")


def _clean(features, labels, num_classes, class_names=None) -> NoisyDataset:
    labels = np.asarray(labels, dtype=int)
    return NoisyDataset(features=np.asarray(features, dtype=float),
                        labels=labels, true_labels=labels.copy(),
                        mask=np.zeros(len(labels), dtype=bool),
                        num_classes=num_classes, class_names=class_names)


def make_synthetic_dataset(kind, n, classes, spread, seed) -> NoisyDataset:
    """Balanced 2-D toy dataset; ``blobs`` puts class centers on a circle,
    ``moons`` is the usual pair of interleaved half circles."""
    if classes < 2:
        raise ConfigError("need at least 2 classes")
    if n < classes:
        raise ConfigError(f"n={n} smaller than class count {classes}")
    if spread <= 0:
        raise ConfigError("spread must be positive")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % classes
    if kind == "blobs":
        angles = 2.0 * np.pi * np.arange(classes) / classes
        centers = BLOB_RADIUS * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        feats = centers[labels] + rng.normal(scale=spread, size=(n, 2))
    elif kind == "moons":
        if classes != 2:
            raise ConfigError("moons supports exactly 2 classes")
        t = rng.uniform(0.0, np.pi, size=n)
        upper = np.stack([np.cos(t), np.sin(t)], axis=1)
        lower = np.stack([1.0 - np.cos(t), 0.5 - np.sin(t)], axis=1)
        feats = np.where((labels == 0)[:, None], upper, lower)
        feats = feats + rng.normal(scale=spread, size=(n, 2))
    else:
        raise ConfigError(f"unknown synthetic dataset kind: {kind!r}")
    return _clean(feats, labels, classes)


def load_csv_dataset(path) -> NoisyDataset:
    """UTF-8 CSV with a header row: feature columns, then a final ``label`` column.

    Label tokens map to class indices in first-appearance order. Parse
    failures name the offending 1-based file row.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", row=1) from None
        if len(header) < 2:
            raise ParseError("need at least one feature column and a label column", row=1)
        if header[-1].strip() != "label":
            raise ParseError(f"last column must be named 'label', got {header[-1]!r}", row=1)
        d = len(header) - 1
        feats, tokens = [], []
        token_index: dict = {}
        for row_no, row in enumerate(reader, start=2):
            if len(row) != d + 1:
                raise ParseError(f"expected {d + 1} columns, got {len(row)}", row=row_no)
            vals = []
            for col, cell in zip(header[:-1], row[:-1]):
                cell = cell.strip()
                if not cell:
                    raise ParseError(f"missing value in column {col!r}", row=row_no)
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(f"non-numeric value {cell!r} in column {col!r}",
                                     row=row_no) from None
            token = row[-1].strip()
            if not token:
                raise ParseError("missing label", row=row_no)
            if token not in token_index:
                token_index[token] = len(token_index)
            feats.append(vals)
            tokens.append(token)
    if not feats:
        raise ParseError("no data rows", row=1)
    labels = np.array([token_index[t] for t in tokens], dtype=int)
    return _clean(np.array(feats), labels, len(token_index), class_names=list(token_index))


def save_csv_dataset(ds: NoisyDataset, path):
    """Inverse of :func:`load_csv_dataset`; writes observed labels only."""
    names = ds.class_names or [str(c) for c in range(ds.num_classes)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(ds.dim)] + ["label"])
        for x, y in zip(ds.features, ds.labels):
            writer.writerow([format(v, ".17g") for v in x] + [names[y]])


def _forbid_reinjection(ds: NoisyDataset):
    if ds.mask.any():
        raise StateError("dataset already carries injected noise; re-injection is not allowed")


def inject_symmetric_noise(ds: NoisyDataset, eta, seed) -> NoisyDataset:
    """Flip each label with probability eta; the replacement is uniform over
    the other classes, so the total flip probability is exactly eta."""
    if not 0.0 <= eta < 1.0:
        raise ConfigError(f"symmetric noise rate must be in [0, 1), got {eta}")
    _forbid_reinjection(ds)
    rng = np.random.default_rng(seed)
    flip = rng.random(ds.n) < eta
    offsets = rng.integers(1, ds.num_classes, size=ds.n)
    labels = ds.true_labels.copy()
    labels[flip] = (labels[flip] + offsets[flip]) % ds.num_classes
    return replace(ds, labels=labels, mask=labels != ds.true_labels)


def inject_asymmetric_noise(ds: NoisyDataset, eta, mapping, seed) -> NoisyDataset:
    """Flip samples of mapped classes to their mapped target with probability eta."""
    spec = NoiseSpec(kind="asymmetric", eta=eta, mapping=dict(mapping), seed=0)
    for src, dst in spec.mapping.items():
        if not (0 <= src < ds.num_classes and 0 <= dst < ds.num_classes):
            raise ConfigError(f"mapping {src}->{dst} outside class range [0, {ds.num_classes})")
    _forbid_reinjection(ds)
    rng = np.random.default_rng(seed)
    flip = rng.random(ds.n) < eta
    labels = ds.true_labels.copy()
    for src, dst in sorted(spec.mapping.items()):
        hit = flip & (ds.true_labels == src)
        labels[hit] = dst
    return replace(ds, labels=labels, mask=labels != ds.true_labels)


def apply_noise(ds: NoisyDataset, spec: NoiseSpec) -> NoisyDataset:
    if spec.kind == "none":
        return ds
    if spec.kind == "symmetric":
        return inject_symmetric_noise(ds, spec.eta, spec.seed)
    return inject_asymmetric_noise(ds, spec.eta, spec.mapping, spec.seed)


def noise_sidecar(spec: NoiseSpec, flipped_count) -> dict:
    """Provenance record written next to noised dataset files."""
    return {
        "kind": spec.kind,
        "eta": spec.eta,
        "mapping": None if spec.mapping is None
        else {str(k): int(v) for k, v in sorted(spec.mapping.items())},
        "seed": spec.seed,
        "flipped_count": int(flipped_count),
    }
