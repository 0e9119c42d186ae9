"""Synthetic datasets, CSV persistence and label-noise injection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .core import seeded_rng

NOISE_KINDS = ("symmetric", "asymmetric-circular", "asymmetric-pairs")

# truck -> automobile, bird -> airplane, deer -> horse, cat <-> dog
CIFAR10_PAIRS = {9: 1, 2: 0, 4: 7, 3: 5, 5: 3}


class DatasetParseError(ValueError):
    """Malformed dataset file. ``line`` is 1-based."""

    def __init__(self, msg: str, line: int):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class GenerationError(RuntimeError):
    pass


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with noisy labels and (optionally) the hidden true labels.

    Arrays are copied and made read-only at construction.
    """

    features: np.ndarray
    noisy_labels: np.ndarray
    class_count: int
    true_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        x = _frozen(self.features, np.float64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise ValueError("features must be a non-empty n x d matrix")
        if not np.all(np.isfinite(x)):
            raise ValueError("features must be finite")
        c = int(self.class_count)
        if c < 2:
            raise ValueError(f"class_count must be >= 2, got {c}")
        y = _frozen(self.noisy_labels, np.int64)
        _check_labels(y, x.shape[0], c, "noisy_labels")
        t = self.true_labels
        if t is not None:
            t = _frozen(t, np.int64)
            _check_labels(t, x.shape[0], c, "true_labels")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "noisy_labels", y)
        object.__setattr__(self, "class_count", c)
        object.__setattr__(self, "true_labels", t)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def with_noisy_labels(self, labels) -> "Dataset":
        return Dataset(self.features, labels, self.class_count, self.true_labels)

    def subset(self, idx) -> "Dataset":
        t = None if self.true_labels is None else self.true_labels[idx]
        return Dataset(self.features[idx], self.noisy_labels[idx], self.class_count, t)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if (self.true_labels is None) != (other.true_labels is None):
            return False
        return (
            self.class_count == other.class_count
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.noisy_labels, other.noisy_labels)
            and (self.true_labels is None or np.array_equal(self.true_labels, other.true_labels))
        )


def _check_labels(y, n, c, name):
    if y.shape != (n,):
        raise ValueError(f"{name} must have length {n}, got shape {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= c):
        raise ValueError(f"{name} must lie in [0, {c})")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "symmetric"
    rate: float = 0.0
    pair_map: Optional[Mapping[int, int]] = field(default=None)

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        _check_rate(self.rate)
        if self.pair_map is not None:
            object.__setattr__(self, "pair_map", {int(k): int(v) for k, v in dict(self.pair_map).items()})


def _check_rate(r):
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"noise rate must be in [0, 1], got {r!r}")


def make_blobs(n, c, d, separation=10.0, sigma=1.0, seed=0, *, max_retries=1000,
               return_centers=False):
    """Isotropic Gaussian clusters with well-separated centers.

    Centers are drawn by rejection sampling inside a cube whose side scales as
    ``separation * c**(1/d)``; every pair of centers ends up at least
    `separation` apart. Class sizes differ by at most one. Samples are returned
    in shuffled order with ``true_labels == noisy_labels``.

    Parameters
    ----------
    n, c, d : int
        Number of samples, classes and feature dimensions.
    separation : float
        Minimum pairwise distance between cluster centers.
    sigma : float
        Per-coordinate standard deviation within a cluster.
    seed : int
    max_retries : int
        Attempts per center before giving up with `GenerationError`.
    return_centers : bool
        Also return the ``c x d`` center matrix.
    """
    if c < 2:
        raise ValueError("need at least two classes")
    if n < c:
        raise ValueError(f"n={n} must be >= c={c}")
    if d < 1:
        raise ValueError("d must be >= 1")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if separation < 0:
        raise ValueError("separation must be non-negative")
    rng = seeded_rng(seed)

    half = 0.5 * separation * max(2.0, 2.0 * c ** (1.0 / d))
    centers = np.empty((c, d))
    for k in range(c):
        for _ in range(max_retries):
            cand = rng.uniform(-half, half, size=d)
            if k == 0 or np.min(np.linalg.norm(centers[:k] - cand, axis=1)) >= separation:
                centers[k] = cand
                break
        else:
            raise GenerationError(
                f"could not place center {k} of {c} at separation {separation} "
                f"after {max_retries} tries"
            )

    counts = np.full(c, n // c)
    counts[: n % c] += 1
    labels = np.repeat(np.arange(c), counts)
    x = centers[labels] + sigma * rng.standard_normal((n, d))
    perm = rng.permutation(n)
    ds = Dataset(x[perm], labels[perm], c, labels[perm])
    return (ds, centers) if return_centers else ds


def _require_true(ds):
    if ds.true_labels is None:
        raise ValueError("noise injection needs a dataset with true_labels")
    return ds.true_labels


def inject_symmetric(ds: Dataset, r: float, seed: int = 0) -> Dataset:
    """Keep each true label with probability ``1 - r``; otherwise draw a new one
    uniformly from all classes (the draw may hit the true class again), so the
    expected corrupted fraction is ``r * (c - 1) / c``."""
    _check_rate(r)
    y = _require_true(ds)
    rng = seeded_rng(seed)
    hit = rng.random(ds.n) < r
    draws = rng.integers(0, ds.class_count, size=ds.n)
    return ds.with_noisy_labels(np.where(hit, draws, y))


def inject_asymmetric(ds: Dataset, spec: NoiseSpec, seed: int = 0) -> Dataset:
    """Class-dependent flips, each applied with probability ``spec.rate``.

    ``asymmetric-circular`` sends class k to ``(k + 1) mod c``;
    ``asymmetric-pairs`` sends each source class in ``spec.pair_map`` to its
    target and leaves other classes alone. The pass is made once over the true
    labels, so with a two-way pair (3 -> 5, 5 -> 3) a flipped label is never
    flipped back.
    """
    y = _require_true(ds)
    c = ds.class_count
    if spec.kind == "asymmetric-circular":
        target = (np.arange(c) + 1) % c
    elif spec.kind == "asymmetric-pairs":
        if not spec.pair_map:
            raise ValueError("asymmetric-pairs noise needs a pair_map")
        target = np.arange(c)
        for src, dst in spec.pair_map.items():
            if not (0 <= src < c and 0 <= dst < c):
                raise ValueError(f"pair {src}->{dst} references a class outside [0, {c})")
            target[src] = dst
    else:
        raise ValueError(f"inject_asymmetric got noise kind {spec.kind!r}")
    rng = seeded_rng(seed)
    hit = rng.random(ds.n) < spec.rate
    return ds.with_noisy_labels(np.where(hit, target[y], y))


def inject_noise(ds: Dataset, spec: NoiseSpec, seed: int = 0) -> Dataset:
    if spec.kind == "symmetric":
        return inject_symmetric(ds, spec.rate, seed)
    return inject_asymmetric(ds, spec, seed)


def corrupted_fraction(ds: Dataset) -> float:
    return float(np.mean(ds.noisy_labels != _require_true(ds)))


def split(ds: Dataset, fractions=(0.9, 0.1), seed: int = 0):
    """Seeded shuffle into a disjoint (train, test) pair."""
    f_train, f_test = (float(f) for f in fractions)
    if f_train <= 0 or f_test <= 0 or abs(f_train + f_test - 1.0) > 1e-9:
        raise ValueError(f"fractions must be positive and sum to 1, got {fractions!r}")
    n_train = int(round(ds.n * f_train))
    if not 0 < n_train < ds.n:
        raise ValueError(f"split of n={ds.n} at {fractions!r} leaves an empty part")
    perm = seeded_rng(seed).permutation(ds.n)
    return ds.subset(np.sort(perm[:n_train])), ds.subset(np.sort(perm[n_train:]))


def save_dataset(ds: Dataset, path) -> None:
    header = [f"f{j}" for j in range(ds.d)] + ["noisy_label"]
    if ds.true_labels is not None:
        header.append("true_label")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(ds.n):
            row = [format(v, ".17g") for v in ds.features[i]]
            row.append(str(ds.noisy_labels[i]))
            if ds.true_labels is not None:
                row.append(str(ds.true_labels[i]))
            w.writerow(row)


def load_dataset(path, class_count: Optional[int] = None) -> Dataset:
    """Read a dataset CSV written by `save_dataset`.

    The file does not record the class count; pass it to validate labels
    against it, otherwise it is inferred as ``max(label) + 1`` (at least 2).
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetParseError("empty file", 1)
    header = [h.strip() for h in rows[0]]
    has_true = header[-1:] == ["true_label"]
    n_feat = len(header) - 1 - has_true
    expected = [f"f{j}" for j in range(n_feat)] + ["noisy_label"] + (["true_label"] if has_true else [])
    if n_feat < 1 or header != expected:
        raise DatasetParseError(f"bad header {header!r}", 1)
    if len(rows) == 1:
        raise DatasetParseError("no samples", 2)

    feats, noisy, true = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DatasetParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
        try:
            feats.append([float(v) for v in row[:n_feat]])
            noisy.append(int(row[n_feat]))
            if has_true:
                true.append(int(row[n_feat + 1]))
        except ValueError as exc:
            raise DatasetParseError(str(exc), lineno) from None
        if not all(np.isfinite(feats[-1])):
            raise DatasetParseError("non-finite feature", lineno)

    labels = noisy + true
    if min(labels) < 0:
        raise ValueError(f"{path}: negative label")
    if class_count is None:
        class_count = max(2, max(labels) + 1)
    elif max(labels) >= class_count:
        raise ValueError(f"{path}: label {max(labels)} out of range for {class_count} classes")
    return Dataset(np.array(feats), noisy, class_count, true if has_true else None)
