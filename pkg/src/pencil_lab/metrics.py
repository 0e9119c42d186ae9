"""Accuracy, label-recovery counts and the per-epoch metrics CSV."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .backbone import forward
from .core import argmax_tiebreak

METRICS_HEADER = (
    "epoch", "phase", "lr", "lambda", "loss_total", "loss_lc", "loss_lo", "loss_le",
    "train_acc", "test_acc", "correct_labels", "recovery_rate",
)


@dataclass
class EpochRecord:
    epoch: int
    phase: int
    lr: float
    lam: float
    loss_total: float
    loss_lc: float
    loss_lo: float
    loss_le: float
    train_acc: float
    test_acc: float
    correct_labels: int
    recovery_rate: float


def accuracy(params, ds, labels="true") -> float:
    """Percentage of samples whose predicted class matches the chosen labels.

    `labels` is ``"true"``, ``"noisy"`` or an explicit label array. Asking for
    true labels on a dataset without them falls back to the noisy ones.
    """
    if ds.n == 0:
        raise ValueError("accuracy of an empty dataset")
    if isinstance(labels, str):
        if labels not in ("true", "noisy"):
            raise ValueError(f"labels must be 'true', 'noisy' or an array, got {labels!r}")
        y = ds.true_labels if labels == "true" and ds.true_labels is not None else ds.noisy_labels
    else:
        y = np.asarray(labels)
    pred = argmax_tiebreak(forward(params, ds.features)[0])
    return 100.0 * float(np.mean(pred == y))


def corrected_count(store, true_labels):
    """Rows whose most probable class equals the ground truth: ``(count, rate)``."""
    true_labels = np.asarray(true_labels)
    if true_labels.shape != (store.n,):
        raise ValueError(f"need {store.n} true labels, got shape {true_labels.shape}")
    count = int(np.sum(store.hard_labels() == true_labels))
    return count, count / store.n


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".6g")


def write_metrics_csv(records, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(METRICS_HEADER)
            for rec in records:
                w.writerow([_fmt(v) for v in astuple(rec)])
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc}") from exc


def read_metrics_csv(path):
    kinds = [f.type for f in fields(EpochRecord)]
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != METRICS_HEADER:
            raise ValueError(f"{path}: unexpected metrics header")
        for row in reader:
            out.append(EpochRecord(*(int(v) if k == "int" else float(v) for k, v in zip(kinds, row))))
    return out


def best_and_last(records):
    """Best and final test accuracy over a trajectory (NaN if it is empty)."""
    accs = [r.test_acc for r in records if not math.isnan(r.test_acc)]
    if not accs:
        return math.nan, math.nan
    return max(accs), accs[-1]
