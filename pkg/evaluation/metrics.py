"""
Per-fold confusion counts, precision/recall/F1 and their LOPO averages.

Metrics are percentages. A zero denominator yields 0 with a degenerate
flag, and degenerate folds still count in the average.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from sklearn.metrics import confusion_matrix

from errors import InputError, ProtocolError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0


@dataclass(frozen=True)
class Prf:
    precision: float
    recall: float
    f1: float
    degenerate_precision: bool = False
    degenerate_recall: bool = False
    degenerate_f1: bool = False

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.precision, self.recall, self.f1)


@dataclass(frozen=True)
class FoldMetrics:
    patient_id: str
    counts: ConfusionCounts
    precision: float
    recall: float
    f1: float
    degenerate: Dict[str, bool] = field(default_factory=dict)

    @classmethod
    def from_counts(cls, patient_id: str, counts: ConfusionCounts) -> "FoldMetrics":
        scores = prf(counts)
        return cls(
            patient_id=patient_id,
            counts=counts,
            precision=scores.precision,
            recall=scores.recall,
            f1=scores.f1,
            degenerate={
                'precision': scores.degenerate_precision,
                'recall': scores.degenerate_recall,
                'f1': scores.degenerate_f1,
            },
        )


@dataclass(frozen=True)
class AverageScores:
    f1: float
    precision: float
    recall: float
    folds: int


def confusion(preds: Sequence[int], labels: Sequence[int]) -> ConfusionCounts:
    """Confusion counts with class 1 (palsy present) as the positive class."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape or preds.ndim != 1:
        raise InputError(f"predictions {tuple(preds.shape)} and labels {tuple(labels.shape)} must be equal-length vectors")
    for name, values in (("predictions", preds), ("labels", labels)):
        if values.size and not np.all((values == 0) | (values == 1)):
            raise InputError(f"{name} must be class indices in {{0, 1}}")
    if preds.size == 0:
        return ConfusionCounts()
    (tn, fp), (fn, tp) = confusion_matrix(labels.astype(np.int64), preds.astype(np.int64), labels=[0, 1])
    return ConfusionCounts(tp=int(tp), fp=int(fp), tn=int(tn), fn=int(fn))


def prf(counts: ConfusionCounts) -> Prf:
    p_den = counts.tp + counts.fp
    r_den = counts.tp + counts.fn
    precision = 100.0 * counts.tp / p_den if p_den else 0.0
    recall = 100.0 * counts.tp / r_den if r_den else 0.0
    pr = precision + recall
    f1 = 2 * precision * recall / pr if pr > 0 else 0.0
    return Prf(precision, recall, f1, p_den == 0, r_den == 0, pr == 0)


def aggregate_lopo(folds: Sequence[FoldMetrics]) -> AverageScores:
    """Unweighted mean over folds (macro over patients)."""
    if not folds:
        raise ProtocolError("cannot average an empty list of folds")
    n = len(folds)
    return AverageScores(
        f1=math.fsum(fold.f1 for fold in folds) / n,
        precision=math.fsum(fold.precision for fold in folds) / n,
        recall=math.fsum(fold.recall for fold in folds) / n,
        folds=n,
    )


def degenerate_folds(folds: Sequence[FoldMetrics]) -> List[str]:
    return [fold.patient_id for fold in folds if any(fold.degenerate.values())]
