"""Evaluation measures: Spearman, MSE, and thresholded classification scores.

Conventions pinned here (the definitions are otherwise folklore):

* Spearman is the Pearson correlation of average ranks; tied values share
  the mean of their rank positions. Constant inputs have no defined value
  and raise UndefinedMetricError rather than returning 0.
* binarize labels a score "efficient" (1) iff score >= cutoff.
* roc_auc is the tie-aware Mann-Whitney statistic (ties count one half).
* average_precision is the step-wise area under the precision-recall
  curve, with operating points at distinct descending score values.
* With no positive predictions, precision is 0; with precision + recall
  equal to 0, f1 is 0. Metrics needing both classes report None when only
  one class is present.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMetricError


def average_ranks(values) -> np.ndarray:
    """1-based ranks, ties averaged."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    sorted_v = v[order]
    ranks = np.empty(v.shape[0], dtype=float)
    i = 0
    n = v.shape[0]
    while i < n:
        j = i
        while j + 1 < n and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _check_paired(a, b, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(a, dtype=float).ravel()
    y = np.asarray(b, dtype=float).ravel()
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < min_len:
        raise ValueError(f"need at least {min_len} pairs, got {x.shape[0]}")
    return x, y


def spearman(a, b) -> float:
    """Rank correlation in [-1, 1]."""
    x, y = _check_paired(a, b, 2)
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedMetricError("spearman undefined for constant input")
    ra = average_ranks(x)
    rb = average_ranks(y)
    da = ra - ra.mean()
    db = rb - rb.mean()
    cov = float(np.sum(da * db))
    va = float(np.sum(da * da))
    vb = float(np.sum(db * db))
    return cov / float(np.sqrt(va * vb))


def mse(a, b) -> float:
    x, y = _check_paired(a, b, 1)
    d = x - y
    return float(np.mean(d * d))


def binarize(scores, cutoff: float) -> np.ndarray:
    """0/1 labels; the boundary score == cutoff counts as efficient."""
    if not 0.0 < cutoff < 1.0:
        raise ValueError(f"cutoff must lie in (0, 1), got {cutoff}")
    return (np.asarray(scores, dtype=float) >= cutoff).astype(int)


def confusion_counts(y_true, y_pred) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) for 0/1 arrays."""
    t = np.asarray(y_true).astype(bool)
    p = np.asarray(y_pred).astype(bool)
    tp = int(np.sum(t & p))
    fp = int(np.sum(~t & p))
    fn = int(np.sum(t & ~p))
    tn = int(np.sum(~t & ~p))
    return tp, fp, fn, tn


def roc_auc(y_true, y_score) -> float | None:
    """Tie-aware rank AUC; None unless both classes are present."""
    t, s = _check_paired(y_true, y_score, 1)
    pos = t > 0.5
    n_pos = int(pos.sum())
    n_neg = t.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = average_ranks(s)
    u = float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def average_precision(y_true, y_score) -> float | None:
    """Step-wise area under the precision-recall curve.

    Operating points sit at each distinct score threshold taken in
    descending order; tied scores enter together.
    """
    t, s = _check_paired(y_true, y_score, 1)
    pos = (t > 0.5).astype(float)
    n_pos = float(pos.sum())
    if n_pos == 0 or n_pos == t.shape[0]:
        return None
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    pos_sorted = pos[order]
    cum_tp = np.cumsum(pos_sorted)
    counts = np.arange(1, t.shape[0] + 1, dtype=float)
    # last index of each distinct-score group
    boundary = np.flatnonzero(np.append(s_sorted[1:] != s_sorted[:-1], True))
    precisions = cum_tp[boundary] / counts[boundary]
    recalls = cum_tp[boundary] / n_pos
    prev_recall = 0.0
    ap = 0.0
    for p, r in zip(precisions, recalls):
        ap += (r - prev_recall) * p
        prev_recall = r
    return float(ap)


def classification_metrics(y_true, y_score, cutoff: float) -> dict[str, float | None]:
    """Confusion-matrix metrics of binarize(y_score, cutoff) against y_true.

    y_true must already be 0/1. roc_auc and average_precision use the raw
    scores and are None when y_true is single-class.
    """
    t, s = _check_paired(y_true, y_score, 1)
    y_pred = binarize(s, cutoff)
    tp, fp, fn, tn = confusion_counts(t, y_pred)
    n = tp + fp + fn + tn
    accuracy = (tp + tn) / n
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return {
        "accuracy": accuracy,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "roc_auc": roc_auc(t, s),
        "average_precision": average_precision(t, s),
    }


@dataclass(frozen=True)
class MetricReport:
    """Spearman, MSE, and per-cutoff classification metrics for one method.

    Undefined entries are stored as None and rendered as NA in report
    files, never coerced to 0.
    """

    spearman: float | None
    mse: float
    thresholds: dict[float, dict[str, float | None]]


def metric_report(y_true, y_score, cutoffs) -> MetricReport:
    """Full evaluation of continuous predictions against continuous labels.

    Classification metrics binarize the true labels and the predictions at
    the same cutoff.
    """
    t, s = _check_paired(y_true, y_score, 1)
    try:
        rho = spearman(t, s)
    except (UndefinedMetricError, ValueError):
        rho = None
    per_threshold = {}
    for cutoff in cutoffs:
        labels = binarize(t, cutoff)
        per_threshold[float(cutoff)] = classification_metrics(labels, s, cutoff)
    return MetricReport(spearman=rho, mse=mse(t, s), thresholds=per_threshold)
