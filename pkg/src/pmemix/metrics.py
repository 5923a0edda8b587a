"""Thresholded multi-label evaluation: per-class precision, recall, F1."""

import math
from dataclasses import dataclass

import numpy as np


def _ratio(num, den):
    return num / den if den > 0 else 0.0


def f1_from_counts(tp, fp, fn):
    """(precision, recall, f1); every 0/0 is taken as 0."""
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2.0 * precision * recall, precision + recall)
    return precision, recall, f1


def confusion(probabilities, labels, threshold=0.5):
    """Per-class (tp, fp, fn, tn) arrays.

    A prediction is positive when ``p >= threshold``.  Missing label entries
    are left out of every count.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    v = labels.values
    if p.shape != v.shape:
        raise ValueError(f"probabilities {p.shape} and labels {v.shape} differ in shape")
    pred = p >= threshold
    known = v >= 0
    truth = v == 1
    tp = (pred & truth & known).sum(axis=0)
    fp = (pred & ~truth & known).sum(axis=0)
    fn = (~pred & truth & known).sum(axis=0)
    tn = (~pred & ~truth & known).sum(axis=0)
    return tp, fp, fn, tn


@dataclass
class MetricsReport:
    tp: list
    fp: list
    fn: list
    tn: list
    precision: list
    recall: list
    f1: list
    threshold: float = 0.5
    epoch: int = None
    seed: int = None

    @property
    def mean_f1(self):
        return mean_f1(self)

    def to_dict(self):
        return {
            "epoch": self.epoch,
            "seed": self.seed,
            "threshold": self.threshold,
            "tp": list(self.tp),
            "fp": list(self.fp),
            "fn": list(self.fn),
            "tn": list(self.tn),
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": list(self.f1),
            "mean_f1": self.mean_f1,
        }

    @classmethod
    def from_dict(cls, doc):
        fields = ("tp", "fp", "fn", "tn", "precision", "recall", "f1", "threshold", "epoch", "seed")
        return cls(**{k: doc[k] for k in fields})


def evaluate(probabilities, labels, threshold=0.5, epoch=None, seed=None):
    tp, fp, fn, tn = confusion(probabilities, labels, threshold)
    precision, recall, f1 = [], [], []
    for k in range(len(tp)):
        p, r, f = f1_from_counts(int(tp[k]), int(fp[k]), int(fn[k]))
        precision.append(p)
        recall.append(r)
        f1.append(f)
    return MetricsReport(
        tp=[int(x) for x in tp], fp=[int(x) for x in fp],
        fn=[int(x) for x in fn], tn=[int(x) for x in tn],
        precision=precision, recall=recall, f1=f1,
        threshold=threshold, epoch=epoch, seed=seed,
    )


def mean_f1(report):
    """Unweighted mean of per-class F1; accepts a report or a plain sequence."""
    scores = report.f1 if isinstance(report, MetricsReport) else report
    scores = [float(s) for s in scores]
    if not scores:
        raise ValueError("mean F1 needs at least one class")
    # fsum is exactly rounded, so class order cannot change the result
    return math.fsum(scores) / len(scores)
