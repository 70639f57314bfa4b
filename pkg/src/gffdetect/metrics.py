"""
Binary classification metrics on top of `sklearn.metrics`.

A score strictly above the threshold counts as a positive decision.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np
from sklearn import metrics as skm

from .exceptions import LengthMismatch, SingleClass, DataError


__all__ = ["MetricsReport", "confusion", "f_measure", "accuracy", "roc_auc", "evaluate"]


log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


def _arrays(preds, labels):
    p = np.asarray(preds, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if p.size != y.size:
        raise LengthMismatch(f"{p.size} predictions for {y.size} labels")
    if p.size == 0:
        raise DataError("Metrics need at least one prediction")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("Labels must be 0 or 1")
    return p, y.astype(np.int64)


def _decisions(preds, labels, threshold):
    p, y = _arrays(preds, labels)
    return (p > threshold).astype(np.int64), y


def confusion(preds, labels, threshold=0.5):
    """
    ``(tp, fp, tn, fn)``; a score strictly above ``threshold`` is positive.

    Examples
    --------
    >>> confusion([0.9, 0.6, 0.2, 0.5], [1, 0, 0, 1])
    (1, 1, 1, 1)
    """
    decided, y = _decisions(preds, labels, threshold)
    tn, fp, fn, tp = skm.confusion_matrix(y, decided, labels=[0, 1]).ravel().tolist()
    return tp, fp, tn, fn


def f_measure(preds, labels, threshold=0.5):
    """
    F1 score at ``threshold``; 0 when precision and recall are both 0.

    Examples
    --------
    >>> round(f_measure([1, 1, 1, 1], [1, 0, 1, 0]), 6)
    0.666667
    >>> f_measure([0.1, 0.2], [1, 0])
    0.0
    """
    decided, y = _decisions(preds, labels, threshold)
    return float(skm.f1_score(y, decided, zero_division=0.0))


def accuracy(preds, labels, threshold=0.5):
    decided, y = _decisions(preds, labels, threshold)
    return float(skm.accuracy_score(y, decided))


def roc_auc(preds, labels):
    """
    Area under the ROC curve: the probability that a random positive
    outscores a random negative, ties counting one half.

    Raises
    ------
    SingleClass
        When only one class is present.

    Examples
    --------
    >>> roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
    0.75
    >>> roc_auc([0.3, 0.3], [0, 1])
    0.5
    """
    p, y = _arrays(preds, labels)
    if y.min() == y.max():
        raise SingleClass("ROC-AUC needs both classes")
    return float(skm.roc_auc_score(y, p))


@dataclass(frozen=True)
class MetricsReport:
    """
    Metrics of one set of predictions.

    ``roc_auc`` is NaN when the labels hold a single class.
    """
    f_measure: float
    accuracy: float
    roc_auc: float
    threshold: float
    n: int
    confusion: tuple

    @property
    def tp(self):
        return self.confusion[0]

    @property
    def fp(self):
        return self.confusion[1]

    @property
    def tn(self):
        return self.confusion[2]

    @property
    def fn(self):
        return self.confusion[3]

    def to_dict(self):
        tp, fp, tn, fn = self.confusion
        return {
            "f_measure": self.f_measure,
            "accuracy": self.accuracy,
            "roc_auc": self.roc_auc,
            "tp": tp,
            "fp": fp,
            "tn": tn,
            "fn": fn,
        }


def evaluate(preds, labels, threshold=0.5):
    """
    All metrics at once.

    Returns
    -------
    MetricsReport
    """
    cm = confusion(preds, labels, threshold)
    try:
        auc = roc_auc(preds, labels)
    except SingleClass:
        log.warning("Only one class among the labels, ROC-AUC is undefined")
        auc = math.nan
    return MetricsReport(
        f_measure=f_measure(preds, labels, threshold),
        accuracy=accuracy(preds, labels, threshold),
        roc_auc=auc,
        threshold=threshold,
        n=sum(cm),
        confusion=cm,
    )
