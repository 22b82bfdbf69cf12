"""Evaluation metrics for imbalanced classification.

Implements the class-balanced mean accuracy (unweighted mean of per-class
recall) and macro one-vs-rest AUC-ROC via the Mann-Whitney rank statistic
with average ranks for ties. Classes absent from the evaluation set are
excluded and reported rather than scored as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


def confusion_matrix(predictions, truth, num_classes):
    """C x C count matrix; rows are true classes, columns predictions."""
    predictions = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predictions.shape != truth.shape:
        raise ValueError("predictions and truth must have equal length")
    if len(truth) and (max(predictions.max(), truth.max()) >= num_classes
                       or min(predictions.min(), truth.min()) < 0):
        raise ValueError("labels out of range")
    mat = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(mat, (truth, predictions), 1)
    return mat


def per_class_tp(predictions, truth, num_classes):
    """Per-class recall TP_i / (TP_i + FN_i); NaN for classes with no instances."""
    mat = confusion_matrix(predictions, truth, num_classes)
    support = mat.sum(axis=1)
    with np.errstate(invalid="ignore"):
        return np.where(support > 0, np.diag(mat) / np.where(support > 0, support, 1), np.nan)


def cma(predictions, truth, num_classes):
    """Class-balanced mean accuracy: unweighted mean of per-class recall."""
    recalls = per_class_tp(predictions, truth, num_classes)
    valid = ~np.isnan(recalls)
    if not valid.any():
        raise ValueError("cma undefined: no class has any instance")
    return float(recalls[valid].mean())


def auc_roc_class(scores, positives):
    """One-vs-rest AUC from scores and a boolean positive mask (average ranks)."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined without both positives and negatives")
    ranks = rankdata(scores)
    return float((ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc_roc_macro(probabilities, truth, num_classes):
    """Macro-averaged one-vs-rest AUC-ROC over classes with both kinds of instance.

    Returns (auc, skipped) where skipped lists the class ids excluded for
    having no positive or no negative instance. Raises if every class is
    excluded.
    """
    probabilities = np.asarray(probabilities, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64)
    per_class, skipped = [], []
    for cls in range(num_classes):
        positives = truth == cls
        if positives.all() or not positives.any():
            skipped.append(cls)
            continue
        per_class.append(auc_roc_class(probabilities[:, cls], positives))
    if not per_class:
        raise ValueError("AUC undefined: every class lacks positives or negatives")
    return float(np.mean(per_class)), skipped


@dataclass
class MetricsReport:
    """Evaluation summary for one prediction set."""

    confusion: np.ndarray
    per_class_recall: np.ndarray   # NaN entries for skipped classes
    cma: float
    auc_macro: float
    classes_skipped: list

    def to_json_dict(self):
        recall = [None if np.isnan(r) else float(r) for r in self.per_class_recall]
        return {
            "cma": self.cma,
            "auc_macro": self.auc_macro,
            "per_class_recall": recall,
            "confusion": [[int(c) for c in row] for row in self.confusion],
            "classes_skipped": [int(c) for c in self.classes_skipped],
        }


def evaluate(probabilities, truth, num_classes):
    """Build a MetricsReport from predicted class probabilities and true labels."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64)
    predictions = probabilities.argmax(axis=1)
    recalls = per_class_tp(predictions, truth, num_classes)
    auc, auc_skipped = auc_roc_macro(probabilities, truth, num_classes)
    skipped = sorted(set(np.flatnonzero(np.isnan(recalls)).tolist()) | set(auc_skipped))
    return MetricsReport(
        confusion=confusion_matrix(predictions, truth, num_classes),
        per_class_recall=recalls,
        cma=cma(predictions, truth, num_classes),
        auc_macro=auc,
        classes_skipped=skipped,
    )
