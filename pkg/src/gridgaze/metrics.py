"""Evaluation protocol: pixel metrics, object metrics, ROC.

Pixel-level comparison first resizes both maps to a common small
resolution (36x64 by default) so maps of any source size are
comparable. D_KL is directed ground-truth-to-prediction with a 1e-7
per-pixel floor before renormalizing; CC is plain Pearson over the
resized pixels.

Object-level scoring is threshold-free for AUC (tie-aware rank
statistic) and thresholded for the confusion counts. The ROC curve is
built so its trapezoidal area equals the rank AUC exactly, and the
operating threshold is chosen by the G-mean rule
argmax sqrt(TPR * (1 - FPR)); a distance-to-corner rule is available
behind a flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gridgaze import saliency
from gridgaze.errors import (
    AllZeroMapError,
    ConstantMapError,
    DegenerateLabelsError,
    LengthMismatchError,
)

METRIC_HEIGHT = 36
METRIC_WIDTH = 64
KL_EPS = 1e-7


@dataclass(frozen=True)
class PixelMetrics:
    kl_divergence: float
    correlation: float


@dataclass(frozen=True)
class ObjectMetrics:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    auc: float


@dataclass(frozen=True)
class RocCurve:
    """Operating points ordered by descending threshold.

    The first point is (above-all-scores, 0, 0); the last is (1, 1)
    at the smallest threshold that admits everything. FPR and TPR are
    non-decreasing along the curve.
    """

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray

    def __len__(self) -> int:
        return self.thresholds.size

    def area(self) -> float:
        """Area under the curve by the trapezoidal rule."""
        return float(np.trapezoid(self.tpr, self.fpr))


def _resized_pair(gt, pred, height: int, width: int):
    g = saliency.as_map(gt)
    p = saliency.as_map(pred)
    if g.max() <= 0.0:
        raise AllZeroMapError("ground-truth map is all zero")
    if p.max() <= 0.0:
        raise AllZeroMapError("predicted map is all zero")
    return (saliency.resize_bilinear(g, height, width),
            saliency.resize_bilinear(p, height, width))


def kl_divergence(gt, pred, height: int = METRIC_HEIGHT,
                  width: int = METRIC_WIDTH) -> float:
    """D_KL(gt || pred) after resize, eps floor, and renormalization."""
    g, p = _resized_pair(gt, pred, height, width)
    g = g + KL_EPS
    p = p + KL_EPS
    g /= g.sum()
    p /= p.sum()
    return float(np.sum(g * np.log(g / p)))


def pearson_cc(gt, pred, height: int = METRIC_HEIGHT,
               width: int = METRIC_WIDTH) -> float:
    """Pearson correlation over the resized pixel pairs."""
    g, p = _resized_pair(gt, pred, height, width)
    # resizing a constant map leaves last-ulp jitter, so compare spans
    # against the value scale instead of testing variance == 0
    for arr in (g, p):
        lo, hi = float(arr.min()), float(arr.max())
        if hi - lo <= 1e-12 * max(1.0, abs(lo), abs(hi)):
            raise ConstantMapError("correlation undefined for a constant map")
    gd = g.ravel() - g.mean()
    pd = p.ravel() - p.mean()
    gn = np.sqrt(np.sum(gd * gd))
    pn = np.sqrt(np.sum(pd * pd))
    return float(np.sum(gd * pd) / (gn * pn))


def pixel_metrics(gt, pred, height: int = METRIC_HEIGHT,
                  width: int = METRIC_WIDTH) -> PixelMetrics:
    return PixelMetrics(kl_divergence=kl_divergence(gt, pred, height, width),
                        correlation=pearson_cc(gt, pred, height, width))


def _binary_pair(labels, decisions):
    y = np.asarray(labels).astype(np.int64).ravel()
    d = np.asarray(decisions).astype(np.int64).ravel()
    if y.size != d.size:
        raise LengthMismatchError(f"{y.size} labels vs {d.size} decisions")
    return y, d


def confusion(labels, decisions) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) counts from binary labels and decisions."""
    y, d = _binary_pair(labels, decisions)
    tp = int(np.sum((y == 1) & (d == 1)))
    fp = int(np.sum((y == 0) & (d == 1)))
    tn = int(np.sum((y == 0) & (d == 0)))
    fn = int(np.sum((y == 1) & (d == 0)))
    return tp, fp, tn, fn


def prf_accuracy(counts) -> tuple[float, float, float, float]:
    """precision, recall, f1, accuracy; zero denominators yield 0."""
    tp, fp, tn, fn = counts
    total = tp + fp + tn + fn
    if total <= 0:
        raise LengthMismatchError("confusion counts are all zero")
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = (2.0 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    accuracy = (tp + tn) / total
    return precision, recall, f1, accuracy


def _score_pair(labels, scores):
    y = np.asarray(labels).astype(np.int64).ravel()
    s = np.asarray(scores, dtype=np.float64).ravel()
    if y.size != s.size:
        raise LengthMismatchError(f"{y.size} labels vs {s.size} scores")
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError(
            f"need both classes, got {n_pos} positive / {n_neg} negative")
    return y, s, n_pos, n_neg


def auc(labels, scores) -> float:
    """Probability a positive outscores a negative, ties counted half.

    Computed from average ranks, so it equals the trapezoidal ROC
    area without building the curve.
    """
    y, s, n_pos, n_neg = _score_pair(labels, scores)
    order = np.argsort(s, kind="stable")
    ranks = np.empty(s.size, dtype=np.float64)
    ranks[order] = np.arange(1, s.size + 1, dtype=np.float64)
    # replace ranks within each tie group by the group's mean rank
    _, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    sums = np.zeros(counts.size, dtype=np.float64)
    np.add.at(sums, inverse, ranks)
    ranks = sums[inverse] / counts[inverse]
    pos_rank_sum = float(ranks[y == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_curve(labels, scores) -> RocCurve:
    """Sweep decision thresholds over the distinct scores.

    Decisions are score >= threshold. A leading all-negative point is
    prepended, and the trailing all-positive point carries threshold 0
    when every score is positive, so curves over probability scores
    run from threshold 1 down to 0.
    """
    y, s, n_pos, n_neg = _score_pair(labels, scores)
    order = np.argsort(-s, kind="stable")
    s_desc = s[order]
    y_desc = y[order]
    tp_cum = np.cumsum(y_desc == 1)
    fp_cum = np.cumsum(y_desc == 0)
    # last index of each run of equal scores = counts after thresholding there
    last = np.nonzero(np.diff(s_desc))[0]
    last = np.append(last, s_desc.size - 1)

    thresholds = s_desc[last]
    tpr = tp_cum[last] / n_pos
    fpr = fp_cum[last] / n_neg

    top = 1.0 if thresholds[0] < 1.0 else np.nextafter(thresholds[0], np.inf)
    bottom = 0.0 if thresholds[-1] > 0.0 else thresholds[-1]
    thresholds = np.concatenate(([top], thresholds[:-1], [bottom]))
    tpr = np.concatenate(([0.0], tpr))
    fpr = np.concatenate(([0.0], fpr))
    return RocCurve(thresholds=thresholds, tpr=tpr, fpr=fpr)


def optimal_threshold(curve: RocCurve, rule: str = "gmean") -> float:
    """Operating threshold from a ROC curve.

    gmean (default): argmax sqrt(TPR * (1 - FPR)).
    distance: minimize distance to the (FPR 0, TPR 1) corner.
    Ties go to the larger threshold, which admits fewer positives.
    """
    if rule == "gmean":
        objective = np.sqrt(curve.tpr * (1.0 - curve.fpr))
        best = int(np.argmax(objective))
    elif rule == "distance":
        d2 = (1.0 - curve.tpr) ** 2 + curve.fpr ** 2
        best = int(np.argmin(d2))
    else:
        raise ValueError(f"unknown threshold rule {rule!r}")
    # thresholds descend, so the first extremum is the largest threshold
    return float(curve.thresholds[best])


def evaluate_objects(labels, scores, threshold: float) -> ObjectMetrics:
    """Confusion metrics at the given threshold plus threshold-free AUC."""
    y, s, _, _ = _score_pair(labels, scores)
    counts = confusion(y, s > threshold)
    precision, recall, f1, accuracy = prf_accuracy(counts)
    tp, fp, tn, fn = counts
    return ObjectMetrics(tp=tp, fp=fp, tn=tn, fn=fn, precision=precision,
                         recall=recall, f1=f1, accuracy=accuracy,
                         auc=auc(y, s))
