"""Binary classification metrics.

Undefined values (zero denominators) are ``None`` and render as ``n/a``.
The positive class is label 1 and a score ``>= threshold`` predicts it.
Ratios are computed from integer counts with a single division so they are
correctly rounded.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateLabelsError, ValidationError

UNDEFINED = None


def _ratio(num, den):
    return UNDEFINED if den == 0 else num / den


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.size != y.size:
        raise ValidationError(f"{s.size} scores but {y.size} labels")
    if s.size == 0:
        raise ValidationError("need at least one (score, label) pair")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("labels must be 0 or 1")
    return s, y.astype(np.int64)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self):
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def confusion_at_threshold(scores, labels, threshold=0.5):
    s, y = _check(scores, labels)
    pred = s >= threshold
    pos = y == 1
    return ConfusionMatrix(tp=int(np.sum(pred & pos)), fp=int(np.sum(pred & ~pos)),
                           tn=int(np.sum(~pred & ~pos)), fn=int(np.sum(~pred & pos)))


@dataclass(frozen=True)
class ScalarMetrics:
    accuracy: object
    precision: object
    recall: object
    f1: object

    def to_dict(self):
        return {"accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "f1": self.f1}


def scalar_metrics(cm):
    """Accuracy, precision, recall and F1 from a confusion matrix.

    F1 is the harmonic mean of precision and recall, written as
    2TP / (2TP + FP + FN); it is undefined when either input is undefined
    or both are zero.
    """
    if cm.total == 0:
        raise ValidationError("confusion matrix is empty")
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    if precision is UNDEFINED or recall is UNDEFINED or cm.tp == 0:
        f1 = UNDEFINED
    else:
        f1 = 2 * cm.tp / (2 * cm.tp + cm.fp + cm.fn)
    return ScalarMetrics(accuracy=(cm.tp + cm.tn) / cm.total, precision=precision,
                         recall=recall, f1=f1)


@dataclass(frozen=True)
class CurveSeries:
    """(x, y, threshold) points; ROC: x=FPR, y=TPR.  PR: x=recall, y=precision."""

    kind: str
    x: tuple
    y: tuple
    thresholds: tuple

    def __len__(self):
        return len(self.x)

    def points(self):
        return list(zip(self.thresholds, self.x, self.y))


def _cumulative_counts(s, y):
    """Cumulative (tp, fp) after admitting each distinct score, highest first."""
    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(1 - y_sorted)
    last = np.r_[np.nonzero(np.diff(s_sorted))[0], s_sorted.size - 1]
    return s_sorted[last], tp[last], fp[last]


def _roc(scores, labels):
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError("ROC needs at least one positive and one negative label")
    thr, tp, fp = _cumulative_counts(s, y)
    tp = np.r_[0, tp]
    fp = np.r_[0, fp]
    thresholds = np.r_[np.inf, thr]
    return CurveSeries("roc", tuple((fp / n_neg).tolist()), tuple((tp / n_pos).tolist()),
                       tuple(thresholds.tolist())), tp, fp, n_pos, n_neg


def roc_curve(scores, labels):
    """ROC points from threshold +inf (0, 0) down to the lowest score (1, 1)."""
    return _roc(scores, labels)[0]


def roc_auc(scores, labels):
    """ROC curve and its trapezoidal area.

    The area is accumulated in integer units of 1/(2 * P * N), so it equals
    the Mann-Whitney pair statistic exactly.
    """
    curve, tp, fp, n_pos, n_neg = _roc(scores, labels)
    twice_area = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    return curve, twice_area / (2 * n_pos * n_neg)


def pr_curve(scores, labels):
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise DegenerateLabelsError("PR curve needs at least one positive label")
    thr, tp, fp = _cumulative_counts(s, y)
    recall = tp / n_pos
    precision = tp / (tp + fp)
    return CurveSeries("pr", tuple(recall.tolist()), tuple(precision.tolist()), tuple(thr.tolist()))


def prob_histogram(scores, bins=10):
    """Counts in ``bins`` equal-width bins over [0, 1]; 1.0 falls in the last bin."""
    if bins < 1:
        raise ConfigError(f"bins must be >= 1, got {bins}")
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if s.size and (s.min() < 0 or s.max() > 1):
        raise ValidationError("histogram scores must lie in [0, 1]")
    idx = np.minimum(np.floor(s * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    edges = np.linspace(0.0, 1.0, bins + 1)
    return edges, counts


@dataclass
class EvalReport:
    model: str
    confusion: ConfusionMatrix
    accuracy: object
    precision: object
    recall: object
    f1: object
    roc_auc: object
    roc: CurveSeries = None
    pr: CurveSeries = None
    histogram: tuple = None
    threshold: float = 0.5
    extra: dict = field(default_factory=dict)

    def scalars(self):
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "roc_auc": self.roc_auc}

    def to_dict(self):
        return {"model": self.model, "threshold": self.threshold, "n": self.confusion.total,
                "confusion": self.confusion.to_dict(), **self.scalars(), **self.extra}


def evaluate_scores(scores, labels, model="model", threshold=0.5, bins=10):
    """Full report; ROC/PR pieces that are undefined for the labels are left out."""
    s, y = _check(scores, labels)
    cm = confusion_at_threshold(s, y, threshold)
    m = scalar_metrics(cm)
    roc = pr = None
    auc = UNDEFINED
    if 0 < y.sum() < y.size:
        roc, auc = roc_auc(s, y)
    if y.sum() > 0:
        pr = pr_curve(s, y)
    return EvalReport(model=model, confusion=cm, accuracy=m.accuracy, precision=m.precision,
                      recall=m.recall, f1=m.f1, roc_auc=auc, roc=roc, pr=pr,
                      histogram=prob_histogram(s, bins), threshold=threshold)
