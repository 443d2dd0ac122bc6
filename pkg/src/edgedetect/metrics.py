"""Binary detection metrics: confusion counts, precision/recall/F1, AUC, kappa."""

import json
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_predictions(cls, y_true, y_pred):
        y_true = np.asarray(y_true).astype(bool)
        y_pred = np.asarray(y_pred).astype(bool)
        return cls(
            tp=int(np.sum(y_true & y_pred)),
            fp=int(np.sum(~y_true & y_pred)),
            tn=int(np.sum(~y_true & ~y_pred)),
            fn=int(np.sum(y_true & ~y_pred)),
        )


def _ratio(num, den):
    return num / den if den else 0.0


def accuracy(c):
    return _ratio(c.tp + c.tn, c.total)


def precision(c):
    return _ratio(c.tp, c.tp + c.fp)


def recall(c):
    return _ratio(c.tp, c.tp + c.fn)


def f1_from(p, r):
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def f1(c):
    return f1_from(precision(c), recall(c))


def kappa(c):
    """Cohen's kappa with marginal-product expected agreement.

    Perfect agreement scores 1 even when only one class occurs (where
    expected agreement is also 1 and the ratio is undefined).
    """
    n = c.total
    if n <= 0:
        raise ValueError("kappa needs at least one observation")
    p_o = (c.tp + c.tn) / n
    p_e = ((c.tp + c.fp) * (c.tp + c.fn) + (c.tn + c.fn) * (c.tn + c.fp)) / (n * n)
    if c.fp == 0 and c.fn == 0:
        return 1.0
    if p_e == 1.0:
        return 0.0
    return (p_o - p_e) / (1.0 - p_e)


def auc(scores, labels):
    """Mann-Whitney AUC: P(attack score > normal score), ties counted half.

    Uses mid-ranks, so the statistic is a sum of half-integers and is
    exact for any realistic sample size.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    # mid-rank of each tie group (1-based ranks)
    _, first, counts = np.unique(sorted_scores, return_index=True, return_counts=True)
    mid = first + (counts + 1) / 2.0
    ranks = np.empty(scores.size)
    ranks[order] = np.repeat(mid, counts)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass
class MetricsReport:
    accuracy: float
    loss: float
    precision: float
    recall: float
    f1: float
    auc: float
    kappa: float
    confusion: Confusion
    test_wall_time_s: float = 0.0
    cell: str = ""

    @property
    def f1_percent(self):
        return 100.0 * self.f1

    def to_dict(self):
        return {
            "cell": self.cell,
            "accuracy": self.accuracy,
            "loss": self.loss,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
            "kappa": self.kappa,
            "confusion": asdict(self.confusion),
            "test_wall_time_s": self.test_wall_time_s,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["confusion"] = Confusion(**d["confusion"])
        return cls(**d)


def report_from_scores(scores, labels, threshold, loss, cell="", wall_time=0.0):
    """Fill every metric from raw scores; AUC is threshold-free."""
    labels = np.asarray(labels)
    conf = Confusion.from_predictions(labels, np.asarray(scores) >= threshold)
    p, r = precision(conf), recall(conf)
    both = 0 < labels.sum() < labels.size
    return MetricsReport(
        accuracy=accuracy(conf),
        loss=loss,
        precision=p,
        recall=r,
        f1=f1_from(p, r),
        auc=auc(scores, labels) if both else float("nan"),
        kappa=kappa(conf),
        confusion=conf,
        test_wall_time_s=wall_time,
        cell=cell,
    )
