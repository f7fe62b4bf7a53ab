"""Confusion-matrix statistics for +1/-1 predictions.

Precision and recall return ``None`` when their denominator is empty; the
teacher-tuning gate needs to tell "flagged nothing" apart from "flagged
badly", so this is deliberately not collapsed to 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(predicted, actual) -> ConfusionMatrix:
    pred = np.asarray(predicted)
    act = np.asarray(actual)
    if pred.shape != act.shape or pred.ndim != 1:
        raise ValueError(f"length mismatch: {pred.shape} vs {act.shape}")
    if pred.size == 0:
        raise ValueError("cannot score an empty prediction set")
    pp = pred == 1
    ap = act == 1
    return ConfusionMatrix(
        tp=int(np.sum(pp & ap)),
        fp=int(np.sum(pp & ~ap)),
        tn=int(np.sum(~pp & ~ap)),
        fn=int(np.sum(~pp & ap)),
    )


def precision(m: ConfusionMatrix) -> float | None:
    denom = m.tp + m.fp
    return m.tp / denom if denom else None


def recall(m: ConfusionMatrix) -> float | None:
    denom = m.tp + m.fn
    return m.tp / denom if denom else None


def accuracy(m: ConfusionMatrix) -> float:
    if m.total == 0:
        raise ValueError("accuracy of an empty confusion matrix")
    return (m.tp + m.tn) / m.total


def accuracy_of(predicted, actual) -> float:
    return accuracy(confusion(predicted, actual))
