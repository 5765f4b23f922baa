# smotecls/services/metrics.py
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, NamedTuple

import numpy as np
from scipy.stats import rankdata

from smotecls.core.errors import ConfigError, DataError
from smotecls.models.dataset import MINOR

DEFAULT_THRESHOLD = 0.5
METRIC_NAMES = ("auprc", "auc", "f1", "gmean")


@dataclass(frozen=True, eq=False)
class ScoredPredictions:
    """Minor-class score per row plus the true label (1 = minor = positive)."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64).ravel()
        y = (np.asarray(self.labels).ravel() == MINOR).astype(np.int8)
        if s.shape != y.shape:
            raise DataError("scores and labels must have the same length")
        if not np.all(np.isfinite(s)):
            raise DataError("scores must be finite")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", y)

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def n_neg(self) -> int:
        return int(len(self.labels) - self.labels.sum())


class Confusion(NamedTuple):
    tp: int
    fp: int
    fn: int
    tn: int


def confusion_at(preds: ScoredPredictions, threshold: float = DEFAULT_THRESHOLD) -> Confusion:
    if not (0.0 <= threshold <= 1.0):
        raise ConfigError("threshold must be in [0, 1]")
    hit = preds.scores >= threshold
    pos = preds.labels == 1
    return Confusion(
        tp=int(np.sum(hit & pos)),
        fp=int(np.sum(hit & ~pos)),
        fn=int(np.sum(~hit & pos)),
        tn=int(np.sum(~hit & ~pos)),
    )


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def precision(c: Confusion) -> float:
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: Confusion) -> float:
    return _ratio(c.tp, c.tp + c.fn)


def specificity(c: Confusion) -> float:
    return _ratio(c.tn, c.tn + c.fp)


def f1(c: Confusion) -> float:
    p, r = precision(c), recall(c)
    return _ratio(2.0 * p * r, p + r)


def gmean(c: Confusion) -> float:
    return math.sqrt(recall(c) * specificity(c))


def roc_auc(preds: ScoredPredictions) -> float:
    """Mann-Whitney U over pos/neg pairs with ties counted as one half."""
    n_pos, n_neg = preds.n_pos, preds.n_neg
    if n_pos == 0 or n_neg == 0:
        raise DataError("roc_auc needs at least one positive and one negative")
    ranks = rankdata(preds.scores, method="average")
    u = ranks[preds.labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auprc(preds: ScoredPredictions) -> float:
    """Average precision over descending score thresholds, each tie block one step."""
    n_pos = preds.n_pos
    if n_pos == 0:
        raise DataError("auprc needs at least one positive")
    order = np.argsort(-preds.scores, kind="stable")
    s = preds.scores[order]
    y = preds.labels[order]
    tp = np.cumsum(y)
    # last index of each tie block
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp_at = tp[ends].astype(np.float64)
    seen = (ends + 1).astype(np.float64)
    prec = tp_at / seen
    rec = tp_at / n_pos
    d_rec = np.diff(np.r_[0.0, rec])
    return float(np.sum(d_rec * prec))


def evaluate(preds: ScoredPredictions, threshold: float = DEFAULT_THRESHOLD) -> Dict[str, float]:
    c = confusion_at(preds, threshold)
    return {
        "auprc": auprc(preds),
        "auc": roc_auc(preds),
        "f1": f1(c),
        "gmean": gmean(c),
    }
