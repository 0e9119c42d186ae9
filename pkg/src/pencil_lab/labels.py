"""Learnable per-sample label distributions.

Each sample owns an unconstrained row of label variables; its label
distribution is the softmax of that row. Loss code works with gradients in
distribution coordinates, and `LabelStore.apply_label_gradient` chains them
through the softmax Jacobian before taking a plain gradient step.
"""

from __future__ import annotations

import csv

import numpy as np

from .core import argmax_tiebreak, softmax, softmax_vjp


class LabelStore:
    """Holds the ``n x c`` label-variable matrix.

    Parameters
    ----------
    y_tilde : array_like, shape (n, c)
    K : float
        Scale used when the store was built from hard labels; kept for the record.
    """

    def __init__(self, y_tilde, K: float = 10.0):
        y = np.array(y_tilde, dtype=np.float64)
        if y.ndim != 2 or y.shape[1] < 2:
            raise ValueError("y_tilde must be an n x c matrix with c >= 2")
        if not np.all(np.isfinite(y)):
            raise ValueError("y_tilde must be finite")
        self.y_tilde = y
        self.K = float(K)

    @property
    def n(self) -> int:
        return self.y_tilde.shape[0]

    @property
    def c(self) -> int:
        return self.y_tilde.shape[1]

    @classmethod
    def from_labels(cls, noisy_labels, c: int, K: float = 10.0) -> "LabelStore":
        labels = np.asarray(noisy_labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValueError("labels must be a 1-D array")
        if labels.size and (labels.min() < 0 or labels.max() >= c):
            raise ValueError(f"labels must lie in [0, {c})")
        if not K >= 0:
            raise ValueError(f"K must be non-negative, got {K!r}")
        y = np.zeros((labels.size, c))
        y[np.arange(labels.size), labels] = K
        return cls(y, K)

    def distributions(self, idx=None):
        rows = self.y_tilde if idx is None else self.y_tilde[idx]
        return softmax(rows)

    def apply_label_gradient(self, idx, grad_wrt_yd, lam: float) -> None:
        """Gradient step ``row <- row - lam * J^T grad`` on one or more rows.

        `idx` is an int or an array of distinct indices; `grad_wrt_yd` then has
        shape ``(c,)`` or ``(len(idx), c)``. No momentum, no weight decay.
        """
        if lam < 0:
            raise ValueError(f"lambda must be >= 0, got {lam!r}")
        idx_arr = np.atleast_1d(np.asarray(idx))
        if idx_arr.dtype.kind not in "iu":
            raise ValueError("indices must be integers")
        if idx_arr.size and (idx_arr.min() < 0 or idx_arr.max() >= self.n):
            raise ValueError(f"sample index out of range [0, {self.n})")
        if np.unique(idx_arr).size != idx_arr.size:
            raise ValueError("indices within one update must be distinct")
        g = np.asarray(grad_wrt_yd, dtype=np.float64).reshape(idx_arr.size, -1)
        if g.shape[1] != self.c:
            raise ValueError(f"gradient length must be {self.c}")
        if lam == 0:
            return
        p = softmax(self.y_tilde[idx_arr])
        self.y_tilde[idx_arr] -= lam * softmax_vjp(p, g)

    def hard_labels(self):
        return argmax_tiebreak(self.distributions())

    def copy(self) -> "LabelStore":
        return LabelStore(self.y_tilde.copy(), self.K)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["idx"] + [f"yt{j}" for j in range(self.c)])
            for i, row in enumerate(self.y_tilde):
                w.writerow([i] + [format(v, ".17g") for v in row])

    @classmethod
    def load(cls, path, K: float = 10.0) -> "LabelStore":
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2 or rows[0][:1] != ["idx"]:
            raise ValueError(f"{path}: not a label-store snapshot")
        c = len(rows[0]) - 1
        y = np.empty((len(rows) - 1, c))
        for i, row in enumerate(rows[1:]):
            if len(row) != c + 1 or int(row[0]) != i:
                raise ValueError(f"{path}: line {i + 2}: malformed row")
            y[i] = [float(v) for v in row[1:]]
        return cls(y, K)


def init_from_labels(noisy_labels, c: int, K: float = 10.0) -> LabelStore:
    """Rows start at ``K * onehot(label)``."""
    return LabelStore.from_labels(noisy_labels, c, K)
