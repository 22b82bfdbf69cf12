import numpy as np
import pytest

from gnncl.metrics import (auc_roc_class, auc_roc_macro, cma, confusion_matrix,
                           evaluate, per_class_tp)


def pairwise_auc_oracle(scores, positives):
    """O(n^2) comparison count: wins + half-ties over all pos/neg pairs."""
    pos = scores[positives]
    neg = scores[~positives]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


# ---------------------------------------------------------------------------
# cma / recall
# ---------------------------------------------------------------------------

def test_cma_perfect():
    y = np.array([0, 1, 2, 2, 1, 0])
    assert cma(y, y, 3) == 1.0


def test_cma_two_class_hand_value():
    truth = np.array([0, 0, 1, 1])
    pred = np.array([0, 0, 1, 0])     # recalls 1.0 and 0.5
    assert cma(pred, truth, 2) == pytest.approx(0.75)


def test_cma_majority_only_classifier():
    truth = np.array([0] * 9 + [1])
    pred = np.zeros(10, dtype=int)    # recalls 1.0 and 0.0
    assert cma(pred, truth, 2) == pytest.approx(0.5)


def test_cma_excludes_absent_classes():
    truth = np.array([0, 0, 1])
    pred = np.array([0, 0, 1])
    assert cma(pred, truth, 5) == 1.0


def test_cma_errors_when_no_instances():
    with pytest.raises(ValueError):
        cma(np.array([], dtype=int), np.array([], dtype=int), 3)


def test_cma_relabel_invariance():
    rng = np.random.default_rng(0)
    truth = rng.integers(0, 4, size=200)
    pred = rng.integers(0, 4, size=200)
    base = cma(pred, truth, 4)
    perm = rng.permutation(4)
    assert cma(perm[pred], perm[truth], 4) == pytest.approx(base, abs=1e-12)


def test_per_class_tp_matches_confusion_diagonal():
    rng = np.random.default_rng(1)
    truth = rng.integers(0, 3, size=120)
    pred = rng.integers(0, 3, size=120)
    mat = confusion_matrix(pred, truth, 3)
    recalls = per_class_tp(pred, truth, 3)
    for cls in range(3):
        assert recalls[cls] == pytest.approx(mat[cls, cls] / mat[cls].sum())


def test_per_class_tp_one_hot_case():
    truth = np.array([0, 0, 1, 2])
    pred = np.array([0, 0, 0, 0])
    recalls = per_class_tp(pred, truth, 3)
    assert recalls[0] == 1.0 and recalls[1] == 0.0 and recalls[2] == 0.0


def test_confusion_row_sums_are_class_counts():
    rng = np.random.default_rng(2)
    truth = rng.integers(0, 5, size=300)
    pred = rng.integers(0, 5, size=300)
    mat = confusion_matrix(pred, truth, 5)
    assert np.array_equal(mat.sum(axis=1), np.bincount(truth, minlength=5))


# ---------------------------------------------------------------------------
# AUC
# ---------------------------------------------------------------------------

def test_auc_perfect_separation():
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    positives = np.array([True, True, False, False])
    assert auc_roc_class(scores, positives) == 1.0


def test_auc_matches_pairwise_oracle():
    rng = np.random.default_rng(7)
    for _ in range(30):
        n = int(rng.integers(5, 200))
        scores = np.round(rng.normal(size=n), 2)   # rounding forces ties
        positives = rng.random(n) < 0.4
        if positives.all() or not positives.any():
            continue
        assert auc_roc_class(scores, positives) == pytest.approx(
            pairwise_auc_oracle(scores, positives), abs=1e-12)


def test_auc_random_scores_near_half():
    rng = np.random.default_rng(21)
    n = 4000
    scores = rng.normal(size=(n, 2))
    truth = rng.integers(0, 2, size=n)
    auc, skipped = auc_roc_macro(scores, truth, 2)
    assert auc == pytest.approx(0.5, abs=0.02)
    assert skipped == []


def test_auc_monotone_transform_invariance():
    rng = np.random.default_rng(3)
    probs = rng.random((150, 3))
    truth = rng.integers(0, 3, size=150)
    base, _ = auc_roc_macro(probs, truth, 3)
    transformed, _ = auc_roc_macro(np.exp(3.0 * probs), truth, 3)
    assert transformed == pytest.approx(base, abs=1e-12)


def test_auc_skips_and_errors():
    probs = np.array([[0.9, 0.1], [0.8, 0.2]])
    auc, skipped = auc_roc_macro(np.hstack([probs, np.zeros((2, 1))]),
                                 np.array([0, 1]), 3)
    assert skipped == [2]
    with pytest.raises(ValueError):
        auc_roc_macro(probs, np.array([0, 0]), 1)


# ---------------------------------------------------------------------------
# evaluate / report
# ---------------------------------------------------------------------------

def test_uniform_random_classifier_cma_near_chance():
    rng = np.random.default_rng(17)
    C, n = 4, 8000
    truth = np.repeat(np.arange(C), n // C)
    pred = rng.integers(0, C, size=n)
    assert cma(pred, truth, C) == pytest.approx(1.0 / C, abs=0.03)


def test_evaluate_report_fields():
    rng = np.random.default_rng(5)
    probs = rng.random((60, 3))
    probs /= probs.sum(axis=1, keepdims=True)
    truth = rng.integers(0, 3, size=60)
    report = evaluate(probs, truth, 3)
    payload = report.to_json_dict()
    assert set(payload) == {"cma", "auc_macro", "per_class_recall", "confusion",
                            "classes_skipped"}
    assert payload["classes_skipped"] == []
    assert all(0.0 <= r <= 1.0 for r in payload["per_class_recall"])
    assert report.confusion.sum() == 60
