"""Statlog (Landsat) loading plus the preprocessing chain used before encoding.

parse -> normalize -> split -> PCA (fit on train) -> partition into shards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .rng import substream

STATLOG_FIELDS = 37
# label 6 ("mixture") has no samples in the published files
STATLOG_LABELS = (1, 2, 3, 4, 5, 7)
STATLOG_CLASS_NAMES = (
    "red soil",
    "cotton crop",
    "grey soil",
    "damp grey soil",
    "soil with vegetation stubble",
    "very damp grey soil",
)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise DatasetError("row count does not match label count")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise DatasetError("label outside class range")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.features[idx], self.labels[idx], self.class_names)

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(np.asarray(features, dtype=float), self.labels, self.class_names)


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (q, d), orthonormal rows
    explained_variance: np.ndarray
    # projection range on the fitting data, used for the [0, 1] rescale
    proj_min: np.ndarray
    proj_max: np.ndarray


@dataclass(frozen=True)
class ShardPlan:
    shards: tuple[tuple[int, ...], ...]
    seed: int

    def sizes(self) -> list[int]:
        return [len(s) for s in self.shards]

    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256(repr(self.shards).encode())
        return h.hexdigest()[:16]


def parse_statlog(text: str) -> Dataset:
    feats, labels = [], []
    remap = {raw: k for k, raw in enumerate(STATLOG_LABELS)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != STATLOG_FIELDS:
            raise DatasetError(f"line {lineno}: expected {STATLOG_FIELDS} fields, got {len(parts)}")
        try:
            values = [int(p) for p in parts]
        except ValueError:
            raise DatasetError(f"line {lineno}: non-integer field") from None
        raw = values[-1]
        if raw not in remap:
            raise DatasetError(f"line {lineno}: unknown label {raw}")
        feats.append(values[:-1])
        labels.append(remap[raw])
    return Dataset(
        np.array(feats, dtype=float).reshape(-1, STATLOG_FIELDS - 1),
        np.array(labels, dtype=int),
        STATLOG_CLASS_NAMES,
    )


def load_statlog(*paths: str | Path) -> Dataset:
    """Parse and concatenate sat.trn / sat.tst style files."""
    text = []
    for p in paths:
        p = Path(p)
        if not p.is_file():
            raise FileNotFoundError(
                f"Statlog file {p} not found; download sat.trn and sat.tst from the UCI "
                "repository (Statlog Landsat Satellite) or use the synthetic dataset"
            )
        text.append(p.read_text())
    return parse_statlog("\n".join(text))


def normalize(dataset: Dataset) -> Dataset:
    """Per-column min-max to [0, 1]; constant columns become 0."""
    x = dataset.features
    if len(x) == 0:
        raise DatasetError("cannot normalize an empty dataset")
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (x - lo) / safe, 0.0)
    return dataset.with_features(out)


def one_hot(labels: Sequence[int], n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    if len(labels) and (labels.min() < 0 or labels.max() >= n_classes):
        raise DatasetError(f"label outside [0, {n_classes})")
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi for a symmetric matrix.

    Returns (eigenvalues, eigenvectors-as-columns), unsorted.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.abs(a).max(), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.triu(a, 1) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/cols p and q
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(vec) > 1e-12)
    if len(nz) and vec[nz[0]] < 0:
        return -vec
    return vec


def pca_fit(features: np.ndarray, q: int) -> PcaModel:
    x = np.asarray(features, dtype=float)
    n, d = x.shape
    if q > d:
        raise DatasetError(f"cannot keep {q} components of {d}-dimensional data")
    if q < 1:
        raise DatasetError("need at least one component")
    if n < 2:
        raise DatasetError("PCA needs at least two rows")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    vals, vecs = jacobi_eigh(cov)
    # stable sort keeps ties in a deterministic order
    order = np.argsort(-vals, kind="stable")[:q]
    comps = np.array([_fix_sign(vecs[:, k]) for k in order])
    var = np.clip(vals[order], 0.0, None)
    proj = xc @ comps.T
    return PcaModel(mean, comps, var, proj.min(axis=0), proj.max(axis=0))


def pca_transform(model: PcaModel, features: np.ndarray) -> np.ndarray:
    """Project and rescale each component to [0, 1] using the fitting range.

    Rows outside the fitted range are clipped so encoders always see [0, 1].
    """
    proj = (np.asarray(features, dtype=float) - model.mean) @ model.components.T
    span = model.proj_max - model.proj_min
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (proj - model.proj_min) / safe, 0.0)
    return np.clip(scaled, 0.0, 1.0)


def split(dataset: Dataset, train_fraction: float = 0.9, seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError("train_fraction must lie in (0, 1)")
    n = len(dataset)
    perm = substream(seed, "split").permutation(n)
    n_train = int(math.floor(train_fraction * n))
    return dataset.subset(np.sort(perm[:n_train])), dataset.subset(np.sort(perm[n_train:]))


def partition(dataset: Dataset, n_shards: int, seed: int = 0) -> ShardPlan:
    """IID shards: seeded shuffle, then round-robin dealing."""
    n = len(dataset)
    if n_shards < 1 or n_shards > n:
        raise DatasetError(f"cannot deal {n} rows into {n_shards} shards")
    perm = substream(seed, "partition").permutation(n)
    shards = tuple(tuple(int(i) for i in perm[k::n_shards]) for k in range(n_shards))
    return ShardPlan(shards, seed)


def synthetic_blobs(
    n_per_class: int,
    n_classes: int,
    q: int,
    separation: float = 0.5,
    seed: int = 0,
    spread: float = 0.05,
) -> Dataset:
    """Gaussian clusters in [0, 1]^q whose centres are pairwise >= separation apart."""
    if n_per_class < 1 or n_classes < 1 or q < 1 or separation <= 0:
        raise DatasetError("blob parameters must be positive")
    rng = substream(seed, "blobs")
    lo, hi = 0.1, 0.9
    centers: list[np.ndarray] = []
    for _ in range(10_000):
        if len(centers) == n_classes:
            break
        c = rng.uniform(lo, hi, size=q)
        if all(np.linalg.norm(c - o) >= separation for o in centers):
            centers.append(c)
    if len(centers) < n_classes:
        raise DatasetError(f"could not place {n_classes} centres {separation} apart in {q} dims")
    feats = np.concatenate([c + spread * rng.standard_normal((n_per_class, q)) for c in centers])
    labels = np.repeat(np.arange(n_classes), n_per_class)
    names = tuple(f"class {k}" for k in range(n_classes))
    return Dataset(np.clip(feats, 0.0, 1.0), labels, names)


def prepare(
    dataset: Dataset,
    q: int,
    train_fraction: float = 0.9,
    seed: int = 0,
) -> tuple[Dataset, Dataset, PcaModel | None]:
    """Normalize, split, then reduce to q features via PCA fitted on train only.

    When the data already has q features PCA is skipped.
    """
    data = normalize(dataset)
    train, test = split(data, train_fraction, seed)
    if data.features.shape[1] == q:
        return train, test, None
    model = pca_fit(train.features, q)
    return (
        train.with_features(pca_transform(model, train.features)),
        test.with_features(pca_transform(model, test.features)),
        model,
    )
