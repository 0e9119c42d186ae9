import math
from types import SimpleNamespace

import numpy as np
import pytest

from pencil_lab.backbone import mlp_init
from pencil_lab.data import Dataset, inject_symmetric
from pencil_lab.labels import init_from_labels
from pencil_lab.metrics import (
    METRICS_HEADER,
    EpochRecord,
    accuracy,
    best_and_last,
    corrected_count,
    read_metrics_csv,
    write_metrics_csv,
)


def oracle_params():
    # one affine layer whose logits are the inputs: predicts argmax(x)
    p = mlp_init((3, 3), 0)
    p.weights[0][...] = np.eye(3)
    return p


def onehot_ds(labels, noisy=None):
    labels = np.asarray(labels)
    return Dataset(np.eye(3)[labels], labels if noisy is None else noisy, 3, labels)


def test_accuracy_perfect_and_constant():
    ds = onehot_ds([0, 1, 2, 1, 0, 2])
    assert accuracy(oracle_params(), ds) == 100.0
    constant = mlp_init((3, 3), 0)
    constant.weights[0][...] = 0.0
    constant.biases[0][:] = [0.0, 1.0, 0.0]
    assert accuracy(constant, ds) == pytest.approx(100 / 3)


def test_accuracy_against_noisy_or_explicit_labels():
    ds = onehot_ds([0, 1, 2, 1], noisy=[0, 0, 2, 0])
    assert accuracy(oracle_params(), ds, "noisy") == 50.0
    assert accuracy(oracle_params(), ds, np.array([0, 1, 0, 0])) == 50.0
    with pytest.raises(ValueError):
        accuracy(oracle_params(), ds, "both")


def test_accuracy_empty_dataset():
    # Dataset itself refuses to be empty, so use a bare stand-in
    ds = SimpleNamespace(n=0, features=np.zeros((0, 3)), noisy_labels=np.zeros(0, int), true_labels=None)
    with pytest.raises(ValueError):
        accuracy(oracle_params(), ds)
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 3)), np.zeros(0, int), 3)


def test_corrected_count_after_init_from_truth():
    y = np.random.default_rng(0).integers(0, 5, 200)
    assert corrected_count(init_from_labels(y, 5), y) == (200, 1.0)


def test_corrected_count_single_mismatch():
    assert corrected_count(init_from_labels([1], 3), [2]) == (0, 0.0)


def test_corrected_count_length_mismatch():
    with pytest.raises(ValueError):
        corrected_count(init_from_labels([0, 1], 3), [0])


def test_initial_rate_is_clean_fraction():
    y = np.random.default_rng(1).integers(0, 10, 20_000)
    ds = inject_symmetric(Dataset(np.zeros((y.size, 1)), y, 10, y), 0.3, seed=0)
    _, rate = corrected_count(init_from_labels(ds.noisy_labels, 10), y)
    assert rate == pytest.approx(1 - np.mean(ds.noisy_labels != y), abs=1e-12)
    assert rate == pytest.approx(0.73, abs=0.01)


def record(i, acc=90.0):
    return EpochRecord(i, 2, 0.03, 300.0, 0.5, 0.1, 0.2, math.nan, 88.0, acc, 40, 0.4)


def test_empty_metrics_file_is_header_only(tmp_path):
    write_metrics_csv([], tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text() == ",".join(METRICS_HEADER) + "\n"
    assert read_metrics_csv(tmp_path / "m.csv") == []


def test_metrics_round_trip(tmp_path):
    recs = [record(1, 91.25), record(2, 93.5)]
    write_metrics_csv(recs, tmp_path / "m.csv")
    back = read_metrics_csv(tmp_path / "m.csv")
    assert len(back) == 2
    for a, b in zip(recs, back):
        assert isinstance(b.epoch, int) and isinstance(b.correct_labels, int)
        assert math.isnan(b.loss_le)
        assert (a.test_acc, a.lam, a.lr) == (b.test_acc, b.lam, b.lr)
    assert (tmp_path / "m.csv").read_text().splitlines()[1] == "1,2,0.03,300,0.5,0.1,0.2,nan,88,91.25,40,0.4"


def test_metrics_bytes_are_stable(tmp_path):
    recs = [record(i, 80 + i / 3) for i in range(1, 6)]
    write_metrics_csv(recs, tmp_path / "a.csv")
    write_metrics_csv(recs, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_read_rejects_foreign_header(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_metrics_csv(tmp_path / "x.csv")


def test_best_and_last():
    assert best_and_last([record(1, 90), record(2, 95), record(3, 92)]) == (95, 92)
    best, last = best_and_last([])
    assert math.isnan(best) and math.isnan(last)
