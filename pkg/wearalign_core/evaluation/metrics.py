# wearalign_core/evaluation/metrics.py
from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn import metrics as skm

from wearalign_core.utils.errors import EmptyInput, IndexOutOfRange, LengthMismatch


def _pair(predictions: Sequence[int], labels: Sequence[int]):
    pred = np.asarray(predictions, dtype=np.int64).reshape(-1)
    true = np.asarray(labels, dtype=np.int64).reshape(-1)
    if pred.shape != true.shape:
        raise LengthMismatch(f"{pred.size} predictions for {true.size} labels")
    return pred, true


def accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    pred, true = _pair(predictions, labels)
    if not pred.size:
        raise EmptyInput("accuracy of an empty prediction set")
    return float(skm.accuracy_score(true, pred))


def macro_f1(predictions: Sequence[int], labels: Sequence[int], n_classes: int) -> float:
    """Unweighted mean over all C classes; a class with precision + recall = 0 contributes 0."""
    pred, true = _pair(predictions, labels)
    if not pred.size:
        raise EmptyInput("macro F1 of an empty prediction set")
    return float(skm.f1_score(true, pred, labels=list(range(n_classes)), average="macro", zero_division=0))


def confusion_matrix(predictions: Sequence[int], labels: Sequence[int], n_classes: int) -> np.ndarray:
    """(C, C) counts, rows = true class, columns = predicted class."""
    pred, true = _pair(predictions, labels)
    if not pred.size:
        return np.zeros((n_classes, n_classes), dtype=np.int64)
    for name, arr in (("prediction", pred), ("label", true)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise IndexOutOfRange(f"{name} outside 0..{n_classes - 1}: {sorted(set(arr[(arr < 0) | (arr >= n_classes)].tolist()))}")
    return skm.confusion_matrix(true, pred, labels=list(range(n_classes))).astype(np.int64)


def row_normalized(confusion: np.ndarray) -> np.ndarray:
    support = confusion.sum(axis=1, keepdims=True)
    return np.divide(confusion, support, out=np.zeros(confusion.shape), where=support > 0)
