"""Three-phase training: backbone warm-up, joint label/parameter learning,
and fine-tuning against the learned label distributions."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .backbone import (MlpParams, SgdState, backward, forward, mlp_init, save_params, sgd_step,
                       standardize_inputs)
from .core import seeded_rng, softmax
from .data import Dataset, NoiseSpec, inject_noise, split
from .labels import LabelStore, init_from_labels
from .losses import cross_entropy, pencil_total
from .metrics import EpochRecord, accuracy, best_and_last, corrected_count, write_metrics_csv

log = logging.getLogger(__name__)

# child-stream ids for seeded_rng(config.seed, stream)
_INIT, _PHASE1, _PHASE2, _PHASE3, _NOISE, _SPLIT = range(6)


@dataclass
class ExperimentConfig:
    """Every knob of a run. Field names double as config-file keys."""

    alpha: float = 0.1
    beta: float = 0.4
    lambda_start: float = 300.0
    lambda_end: float = 300.0
    K: float = 10.0
    lr_phase1: float = 0.03
    lr_phase2: float = 0.03
    lr_phase3: float = 0.02
    lr3_decay_epochs: tuple = (13, 26)
    epochs: tuple = (20, 40, 40)
    batch_size: int = 128
    momentum: float = 0.9
    weight_decay: float = 1e-4
    seed: int = 0
    noise_kind: str = "symmetric"
    noise_rate: float = 0.0
    noise_pairs: Optional[dict] = None
    hidden_sizes: tuple = (64, 64)
    test_fraction: float = 0.1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(ok, key, what):
            if not ok:
                raise ValueError(f"{key}: {what}, got {getattr(self, key)!r}")

        for key in ("alpha", "beta", "lambda_start", "lambda_end", "K", "weight_decay"):
            need(getattr(self, key) >= 0, key, "must be >= 0")
        for key in ("lr_phase1", "lr_phase2", "lr_phase3"):
            need(getattr(self, key) > 0, key, "must be > 0")
        need(0 <= self.momentum < 1, "momentum", "must be in [0, 1)")
        need(len(self.epochs) == 3 and min(self.epochs) >= 0, "epochs", "must be three counts >= 0")
        need(all(e >= 0 for e in self.lr3_decay_epochs), "lr3_decay_epochs", "must be >= 0")
        need(self.batch_size >= 1, "batch_size", "must be >= 1")
        need(all(h >= 1 for h in self.hidden_sizes), "hidden_sizes", "must be positive")
        need(0 < self.test_fraction < 1, "test_fraction", "must be in (0, 1)")
        need(0 <= self.noise_rate <= 1, "noise_rate", "must be in [0, 1]")
        try:
            self.noise_spec
        except ValueError as exc:
            raise ValueError(f"noise_kind: {exc}") from None

    @property
    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(self.noise_kind, self.noise_rate, self.noise_pairs)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def lambda_at(self, step: int, total_steps: int) -> float:
        """Label learning rate for phase-2 batch `step` of `total_steps`,
        linear from `lambda_start` (first batch) to `lambda_end` (last batch)."""
        if total_steps <= 1:
            return float(self.lambda_start)
        t = step / (total_steps - 1)
        return float(self.lambda_start + (self.lambda_end - self.lambda_start) * t)

    def lr3_at(self, epoch: int) -> float:
        """Phase-3 learning rate at 0-based phase epoch `epoch`; divided by 10
        once for every decay point already reached."""
        drops = sum(1 for e in self.lr3_decay_epochs if epoch >= e)
        return self.lr_phase3 / 10.0 ** drops


@dataclass
class TrainReport:
    records: list
    best_test_acc: float
    last_test_acc: float
    hard_labels: np.ndarray
    params: MlpParams
    store: LabelStore
    wall_time: float = 0.0
    train: Optional[Dataset] = field(default=None, repr=False)
    test: Optional[Dataset] = field(default=None, repr=False)


EpochHook = Callable[[int, float, float, dict, MlpParams, Optional[LabelStore]], None]


def _batches(n, batch_size, rng):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def _n_batches(n, batch_size):
    return math.ceil(n / batch_size)


class _Means:
    """Sample-weighted running means of loss terms over an epoch."""

    def __init__(self):
        self.sums, self.count = {}, 0

    def add(self, **terms):
        size = None
        for k, v in terms.items():
            v = np.atleast_1d(v)
            size = v.size
            self.sums[k] = self.sums.get(k, 0.0) + float(v.sum())
        self.count += size

    def result(self):
        return {k: s / max(self.count, 1) for k, s in self.sums.items()}


def _default_params(ds, config):
    sizes = (ds.d, *config.hidden_sizes, ds.class_count)
    params = mlp_init(sizes, int(seeded_rng(config.seed, _INIT).integers(2**63)))
    return standardize_inputs(params, ds.features)


def phase1_backbone(ds: Dataset, config: ExperimentConfig, params: Optional[MlpParams] = None,
                    *, on_epoch: Optional[EpochHook] = None) -> MlpParams:
    """Plain cross-entropy training on the noisy labels at a fixed learning rate."""
    params = _default_params(ds, config) if params is None else params
    state = SgdState.zeros_like(params, config.momentum, config.weight_decay)
    rng = seeded_rng(config.seed, _PHASE1)
    lr = config.lr_phase1
    for epoch in range(config.epochs[0]):
        means = _Means()
        for idx in _batches(ds.n, config.batch_size, rng):
            logits, cache = forward(params, ds.features[idx])
            ce, g = cross_entropy(softmax(logits), ds.noisy_labels[idx])
            sgd_step(params, backward(params, cache, g), lr, state)
            means.add(total=ce)
        if on_epoch:
            on_epoch(epoch, lr, math.nan, means.result(), params, None)
    return params


def phase2_pencil(ds: Dataset, params: MlpParams, config: ExperimentConfig,
                  store: Optional[LabelStore] = None, *,
                  on_epoch: Optional[EpochHook] = None):
    """Joint updates of the network and the label variables.

    Per mini-batch: one forward pass, the weighted total loss per sample, a
    momentum-SGD step on the batch-mean parameter gradient, and a plain
    gradient step with the current lambda on the label rows of the batch
    members. Because the batch loss is a mean, each row receives its own
    per-sample gradient divided by the batch size.
    """
    c = ds.class_count
    if store is None:
        store = init_from_labels(ds.noisy_labels, c, config.K)
    if store.n != ds.n or store.c != c:
        raise ValueError(f"label store is {store.n}x{store.c}, dataset needs {ds.n}x{c}")
    state = SgdState.zeros_like(params, config.momentum, config.weight_decay)
    rng = seeded_rng(config.seed, _PHASE2)
    lr = config.lr_phase2
    per_epoch = _n_batches(ds.n, config.batch_size)
    total_steps = config.epochs[1] * per_epoch
    step = 0
    for epoch in range(config.epochs[1]):
        means = _Means()
        lam_first = config.lambda_at(step, total_steps)
        for idx in _batches(ds.n, config.batch_size, rng):
            lam = config.lambda_at(step, total_steps)
            logits, cache = forward(params, ds.features[idx])
            b = pencil_total(softmax(logits), store.distributions(idx), ds.noisy_labels[idx],
                             config.alpha, config.beta, c)
            sgd_step(params, backward(params, cache, b.grad_wrt_logits), lr, state)
            store.apply_label_gradient(idx, b.grad_wrt_yd / idx.size, lam)
            means.add(total=b.total, lc=b.lc, lo=b.lo, le=b.le)
            step += 1
        if on_epoch:
            on_epoch(epoch, lr, lam_first, means.result(), params, store)
    return params, store


def phase3_finetune(ds: Dataset, params: MlpParams, store: LabelStore, config: ExperimentConfig,
                    *, on_epoch: Optional[EpochHook] = None) -> MlpParams:
    """Classification loss only, against the frozen label distributions, with
    a step-decayed learning rate. The other loss terms are still evaluated so
    they show up in the metrics."""
    c = ds.class_count
    targets = store.distributions()
    state = SgdState.zeros_like(params, config.momentum, config.weight_decay)
    rng = seeded_rng(config.seed, _PHASE3)
    for epoch in range(config.epochs[2]):
        lr = config.lr3_at(epoch)
        means = _Means()
        for idx in _batches(ds.n, config.batch_size, rng):
            logits, cache = forward(params, ds.features[idx])
            b = pencil_total(softmax(logits), targets[idx], ds.noisy_labels[idx], 0.0, 0.0, c)
            sgd_step(params, backward(params, cache, b.grad_wrt_logits), lr, state)
            means.add(total=b.total, lc=b.lc, lo=b.lo, le=b.le)
        if on_epoch:
            on_epoch(epoch, lr, 0.0, means.result(), params, store)
    return params


def run_baseline(config: ExperimentConfig, train: Dataset, test: Dataset, params=None):
    """Cross-entropy on the noisy labels for the same number of epochs and the
    same learning-rate timeline as a full run (phase-1 rate, phase-2 rate,
    then the decayed phase-3 rate), with no label correction.

    Returns ``(records, best_test_acc, last_test_acc, params)``.
    """
    params = _default_params(train, config) if params is None else params
    state = SgdState.zeros_like(params, config.momentum, config.weight_decay)
    rng = seeded_rng(config.seed, _PHASE1)
    t1, t2, t3 = config.epochs
    records = []
    for epoch in range(t1 + t2 + t3):
        if epoch < t1:
            phase, lr = 1, config.lr_phase1
        elif epoch < t1 + t2:
            phase, lr = 2, config.lr_phase2
        else:
            phase, lr = 3, config.lr3_at(epoch - t1 - t2)
        means = _Means()
        for idx in _batches(train.n, config.batch_size, rng):
            logits, cache = forward(params, train.features[idx])
            ce, g = cross_entropy(softmax(logits), train.noisy_labels[idx])
            sgd_step(params, backward(params, cache, g), lr, state)
            means.add(total=ce)
        records.append(EpochRecord(
            epoch + 1, phase, lr, math.nan, means.result()["total"], math.nan, math.nan, math.nan,
            accuracy(params, train, "noisy"), accuracy(params, test, "true"), -1, math.nan,
        ))
    best, last = best_and_last(records)
    return records, best, last, params


def prepare_data(config: ExperimentConfig, ds: Dataset, test: Optional[Dataset] = None):
    """Split off a test set (unless one is given) and apply the configured
    label noise to the training part."""
    if test is None:
        ds, test = split(ds, (1 - config.test_fraction, config.test_fraction),
                         seed=int(seeded_rng(config.seed, _SPLIT).integers(2**63)))
    if config.noise_rate > 0:
        ds = inject_noise(ds, config.noise_spec, seed=int(seeded_rng(config.seed, _NOISE).integers(2**63)))
    return ds, test


def write_corrected_labels(store: LabelStore, path, dump_path=None) -> None:
    """``idx,hard_label,peak_prob``; optionally the full distributions too."""
    dist = store.distributions()
    hard = store.hard_labels()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("idx,hard_label,peak_prob\n")
        for i, (h, row) in enumerate(zip(hard, dist)):
            fh.write(f"{i},{h},{row[h]:.6g}\n")
    if dump_path is not None:
        with open(dump_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("idx," + ",".join(f"p{j}" for j in range(store.c)) + "\n")
            for i, row in enumerate(dist):
                fh.write(f"{i}," + ",".join(format(v, ".17g") for v in row) + "\n")


def run_experiment(config: ExperimentConfig, ds: Dataset, test: Optional[Dataset] = None, *,
                   out_dir=None, params: Optional[MlpParams] = None,
                   store: Optional[LabelStore] = None, dump_distributions=False) -> TrainReport:
    """Run all three phases and collect per-epoch metrics.

    Without an explicit `test` set, ``config.test_fraction`` of `ds` is held
    out. The configured noise (if its rate is positive) is injected into the
    training part from its true labels. Test accuracy is always measured
    against true labels when the test set has them.

    Passing `params` and/or `store` resumes from snapshots. With `out_dir`,
    parameter and label snapshots are written at each phase boundary along
    with ``metrics.csv`` and ``corrected_labels.csv``; the metrics written so
    far are flushed even if training fails.
    """
    t0 = time.perf_counter()
    train, test = prepare_data(config, ds, test)
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

    records: list = []
    has_truth = train.true_labels is not None
    init_correct = (corrected_count(init_from_labels(train.noisy_labels, train.class_count, config.K),
                                    train.true_labels) if has_truth else (-1, math.nan))

    def hook_for(phase):
        def hook(_epoch, lr, lam, losses, p, s):
            count, rate = init_correct
            if s is not None and has_truth:
                count, rate = corrected_count(s, train.true_labels)
            records.append(EpochRecord(
                len(records) + 1, phase, lr, lam,
                losses.get("total", math.nan), losses.get("lc", math.nan),
                losses.get("lo", math.nan), losses.get("le", math.nan),
                accuracy(p, train, "noisy"), accuracy(p, test, "true"), count, rate,
            ))
            r = records[-1]
            log.debug("epoch %d phase %d loss %.4g test %.2f recovered %s",
                      r.epoch, phase, r.loss_total, r.test_acc, count)
        return hook

    try:
        params = phase1_backbone(train, config, params, on_epoch=hook_for(1))
        if out:
            save_params(params, out / "params_phase1.txt")
        params, store = phase2_pencil(train, params, config, store, on_epoch=hook_for(2))
        if out:
            save_params(params, out / "params_phase2.txt")
            store.save(out / "labels_phase2.csv")
        params = phase3_finetune(train, params, store, config, on_epoch=hook_for(3))
        if out:
            save_params(params, out / "params_final.txt")
            write_corrected_labels(store, out / "corrected_labels.csv",
                                   out / "label_distributions.csv" if dump_distributions else None)
    finally:
        if out:
            write_metrics_csv(records, out / "metrics.csv")

    best, last = best_and_last(records)
    if not records:
        best = last = accuracy(params, test, "true")
    return TrainReport(records, best, last, store.hard_labels(), params, store,
                       time.perf_counter() - t0, train, test)
