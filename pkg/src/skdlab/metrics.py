"""Evaluation metrics: accuracy, macro F1, Pearson and Spearman correlation.

Combined scores follow the usual GLUE-style conventions: (accuracy + F1)/2
for paired-classification tasks and (Pearson + Spearman)/2 for similarity
tasks.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import MetricUndefinedError, ShapeError


def _paired(a, b, min_len: int = 1):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 1 or b.ndim != 1:
        raise ShapeError("metric inputs must be 1-D")
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < min_len:
        raise ShapeError(f"need at least {min_len} points, got {a.shape[0]}")
    return a, b


def accuracy(preds, labels) -> float:
    preds, labels = _paired(preds, labels)
    return float(np.mean(preds == labels))


def f1_macro(preds, labels) -> float:
    """Unweighted mean of per-class F1 over the classes present in either input.

    A class with zero true positives and no false positives/negatives cannot
    occur here (it would not be present); zero denominators score 0.
    """
    preds, labels = _paired(preds, labels)
    classes = np.union1d(np.unique(preds), np.unique(labels))
    scores = []
    for c in classes:
        tp = np.sum((preds == c) & (labels == c))
        fp = np.sum((preds == c) & (labels != c))
        fn = np.sum((preds != c) & (labels == c))
        denom = 2 * tp + fp + fn
        scores.append(0.0 if denom == 0 else 2.0 * tp / denom)
    return float(np.mean(scores))


def pearson(x, y) -> float:
    x, y = _paired(x, y, min_len=2)
    x = x.astype(np.float64)
    y = y.astype(np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt(np.sum(xc * xc) * np.sum(yc * yc))
    if denom == 0:
        raise MetricUndefinedError("pearson undefined for constant input")
    return float(np.sum(xc * yc) / denom)


def average_ranks(x) -> np.ndarray:
    """1-based ranks with ties assigned the average of their positions."""
    x = np.asarray(x)
    n = x.shape[0]
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    sx = x[order]
    while i < n:
        j = i
        while j + 1 < n and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Pearson correlation of average-tied ranks."""
    x, y = _paired(x, y, min_len=2)
    return pearson(average_ranks(x), average_ranks(y))


@dataclass
class MetricReport:
    """Per-run metric bundle; fields are optional per task type."""

    accuracy: float | None = None
    f1_macro: float | None = None
    pearson: float | None = None
    spearman: float | None = None

    @property
    def combined_acc_f1(self) -> float | None:
        if self.accuracy is None or self.f1_macro is None:
            return None
        return (self.accuracy + self.f1_macro) / 2

    @property
    def combined_corr(self) -> float | None:
        if self.pearson is None or self.spearman is None:
            return None
        return (self.pearson + self.spearman) / 2

    def to_dict(self) -> dict:
        out = {}
        for key in ("accuracy", "f1_macro", "pearson", "spearman"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        if self.combined_acc_f1 is not None:
            out["combined_acc_f1"] = self.combined_acc_f1
        if self.combined_corr is not None:
            out["combined_corr"] = self.combined_corr
        return out


def classification_report(preds, labels) -> MetricReport:
    return MetricReport(accuracy=accuracy(preds, labels), f1_macro=f1_macro(preds, labels))


def similarity_report(preds, targets) -> MetricReport:
    return MetricReport(pearson=pearson(preds, targets), spearman=spearman(preds, targets))
