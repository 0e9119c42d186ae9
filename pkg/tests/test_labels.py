import math

import numpy as np
import pytest

from pencil_lab.core import seeded_rng, softmax
from pencil_lab.gradcheck import numeric_grad, rel_err
from pencil_lab.labels import LabelStore, init_from_labels


def test_init_rows_and_peak():
    store = init_from_labels([3], 10, K=10)
    expected = np.zeros(10)
    expected[3] = 10
    assert np.array_equal(store.y_tilde[0], expected)
    p = store.distributions()[0]
    assert p.argmax() == 3
    assert p[3] == pytest.approx(math.exp(10) / (math.exp(10) + 9), abs=1e-12)
    assert p[3] == pytest.approx(0.999592, abs=1e-6)


def test_init_k_zero_is_uniform():
    np.testing.assert_allclose(init_from_labels([0, 2], 4, K=0).distributions(), 0.25)


def test_identical_labels_give_identical_rows():
    s = init_from_labels([1, 1, 0], 3)
    assert np.array_equal(s.y_tilde[0], s.y_tilde[1])


@pytest.mark.parametrize("labels, c", [([0, 3], 3), ([-1], 2)])
def test_init_rejects_bad_labels(labels, c):
    with pytest.raises(ValueError):
        init_from_labels(labels, c)


def test_hard_labels_after_init_equal_noisy_labels():
    labels = seeded_rng(0).integers(0, 7, 500)
    assert np.array_equal(init_from_labels(labels, 7).hard_labels(), labels)


def test_hard_labels_ties_and_plain_rows():
    s = LabelStore([[1.0, 5.0, 2.0], [0.0, 0.0, 0.0], [2.0, 2.0, 1.0]])
    assert s.hard_labels().tolist() == [1, 0, 0]


def test_zero_row_is_uniform():
    np.testing.assert_allclose(LabelStore(np.zeros((1, 5))).distributions(), 0.2)


def test_lambda_zero_leaves_row_unchanged():
    s = init_from_labels([0, 1], 3)
    before = s.y_tilde.copy()
    s.apply_label_gradient(0, [1.0, -2.0, 3.0], 0.0)
    assert np.array_equal(s.y_tilde, before)


def test_constant_gradient_is_annihilated():
    s = LabelStore([[0.3, -1.2, 2.0]])
    before = s.y_tilde.copy()
    s.apply_label_gradient(0, np.full(3, 4.2), 5.0)
    np.testing.assert_allclose(s.y_tilde, before, atol=1e-14)


def test_two_class_hand_example():
    # y^d = (0.5, 0.5): J = [[.25, -.25], [-.25, .25]], J^T (1, 0) = (.25, -.25)
    s = LabelStore([[0.0, 0.0]])
    s.apply_label_gradient(0, [1.0, 0.0], 1.0)
    np.testing.assert_allclose(s.y_tilde[0], [-0.25, 0.25], atol=1e-15)


def test_update_touches_only_its_row():
    s = LabelStore(seeded_rng(1).normal(size=(5, 4)))
    before = s.y_tilde.copy()
    s.apply_label_gradient(2, [1.0, 0.0, -1.0, 0.5], 3.0)
    changed = np.any(s.y_tilde != before, axis=1)
    assert changed.tolist() == [False, False, True, False, False]


def test_batched_update_matches_row_by_row():
    rng = seeded_rng(2)
    y = rng.normal(size=(6, 3))
    g = rng.normal(size=(3, 3))
    a, b = LabelStore(y), LabelStore(y)
    a.apply_label_gradient(np.array([4, 0, 2]), g, 0.7)
    for i, row in zip([4, 0, 2], g):
        b.apply_label_gradient(i, row, 0.7)
    np.testing.assert_allclose(a.y_tilde, b.y_tilde, rtol=0, atol=1e-15)


@pytest.mark.parametrize("idx", [5, -1, np.array([0, 0])])
def test_bad_index(idx):
    s = LabelStore(np.zeros((5, 2)))
    with pytest.raises(ValueError):
        s.apply_label_gradient(idx, np.zeros((np.size(idx), 2)), 1.0)


def test_negative_lambda_rejected():
    with pytest.raises(ValueError):
        LabelStore(np.zeros((1, 2))).apply_label_gradient(0, [0.0, 0.0], -1.0)


def test_chain_rule_matches_finite_differences():
    # scalar loss L(p) = a.p + 0.5 p.B.p on top of the distribution
    rng = seeded_rng(3)
    worst = 0.0
    for _ in range(100):
        c = int(rng.integers(2, 9))
        a = rng.normal(size=c)
        B = rng.normal(size=(c, c))
        B = B + B.T
        yt = rng.normal(0, 2, c)

        def loss(v):
            p = softmax(v)
            return a @ p + 0.5 * p @ B @ p

        s = LabelStore(yt[None])
        p = s.distributions(0)
        s.apply_label_gradient(0, a + B @ p, 1.0)
        worst = max(worst, rel_err(yt - s.y_tilde[0], numeric_grad(loss, yt)))
    assert worst <= 1e-4


def test_distributions_stay_valid_under_many_updates():
    rng = seeded_rng(4)
    s = init_from_labels(rng.integers(0, 6, 50), 6, K=10)
    for _ in range(10_000):
        i = int(rng.integers(50))
        s.apply_label_gradient(i, rng.normal(0, 10, 6), float(rng.uniform(0, 50)))
    p = s.distributions()
    assert np.all(np.isfinite(s.y_tilde))
    assert np.all(np.abs(p.sum(axis=1) - 1) <= 1e-9)
    assert np.all(p > 0)


def test_snapshot_round_trip(tmp_path):
    s = LabelStore(seeded_rng(5).normal(size=(7, 3)) * 1e3)
    s.save(tmp_path / "labels.csv")
    back = LabelStore.load(tmp_path / "labels.csv")
    assert np.array_equal(back.y_tilde, s.y_tilde)
    assert (tmp_path / "labels.csv").read_text().splitlines()[0] == "idx,yt0,yt1,yt2"
