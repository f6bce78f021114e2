"""Anomaly scoring against binary ground truth, ROC construction, AUC, and
the comparison table.

AUC uses the Mann-Whitney pair-counting convention with ties worth 1/2, so
it is exact for any finite score set and invariant under strictly
increasing score transforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError
from .encode import VideoRepresentation
from .svm import MulticlassModel, predict

#: AUC values reported in the surveillance literature on UCSD, kept as
#: static reference rows for the comparison table (never recomputed here).
REFERENCE_AUC = (("MDT", 0.78), ("SF", 0.74), ("MPPCA", 0.65))


@dataclass
class LabeledScore:
    id: str
    score: float
    truth: int  # 1 = anomalous/positive


@dataclass
class RocResult:
    points: list[tuple[float, float]]  # (false-positive rate, true-positive rate)
    auc: float


def roc_auc(scores: list[LabeledScore]) -> RocResult:
    """ROC points from threshold sweeping plus the exact pair-counting AUC.

    Requires at least one positive and one negative.  Tied (positive,
    negative) pairs count 1/2; the integer counting keeps the result exact
    up to one final division.
    """
    for s in scores:
        if not np.isfinite(s.score):
            raise DataError(f"non-finite score for id {s.id!r}")
        if s.truth not in (0, 1):
            raise DataError(f"truth flag must be 0 or 1, got {s.truth!r}")
    n_pos = sum(1 for s in scores if s.truth == 1)
    n_neg = len(scores) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("need at least one positive and one negative score")

    by_value: dict[float, list[int]] = {}
    for s in scores:
        by_value.setdefault(float(s.score), []).append(s.truth)

    greater = 0  # (pos, neg) pairs with pos scored strictly higher
    ties = 0
    neg_below = 0
    for value in sorted(by_value):
        group = by_value[value]
        p_g = sum(group)
        n_g = len(group) - p_g
        greater += p_g * neg_below
        ties += p_g * n_g
        neg_below += n_g
    auc = (greater + 0.5 * ties) / (n_pos * n_neg)

    points = [(0.0, 0.0)]
    tp = fp = 0
    for value in sorted(by_value, reverse=True):
        group = by_value[value]
        tp += sum(group)
        fp += len(group) - sum(group)
        points.append((fp / n_neg, tp / n_pos))
    return RocResult(points=points, auc=auc)


def score_clips(
    bundle: MulticlassModel,
    reps: Iterable[VideoRepresentation],
    truth: Mapping[str, int],
    normal_label: str = "normal",
) -> list[LabeledScore]:
    """Anomaly score per clip: the best raw decision value among the
    non-normal class predictors (for a binary bundle this is just the
    anomaly class's predictor)."""
    anomaly_classes = [c for c in bundle.classes if c != normal_label]
    if not anomaly_classes:
        raise DataError(f"model has no class other than {normal_label!r}")
    out = []
    for rep in reps:
        values = [
            predict(bundle.models[bundle.classes.index(c)], rep.vector)
            for c in anomaly_classes
        ]
        out.append(LabeledScore(rep.video_id, max(values), int(truth[rep.video_id])))
    return out


def report(result: RocResult, baselines: bool = True) -> str:
    """Comparison table; the reference rows are literature values, only the
    "Ours" row is computed from this run."""
    lines = ["Method   AUC", "-------  ----"]
    if baselines:
        for name, auc in REFERENCE_AUC:
            lines.append(f"{name:<8} {auc:.2f}  (literature)")
    lines.append(f"{'Ours':<8} {result.auc:.2f}")
    return "\n".join(lines)


def roc_csv(result: RocResult) -> str:
    """CSV dump of the ROC curve for external plotting."""
    lines = ["fpr,tpr"]
    for fpr, tpr in result.points:
        lines.append(f"{fpr!r},{tpr!r}")
    return "\n".join(lines)
