"""Tube overlap, average best overlap (per class and mean) and recall vs IoU."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import GroundTruthTube, TubePath, iou


def default_thresholds() -> list[float]:
    return [round(0.05 * i, 2) for i in range(21)]


@dataclass
class MetricsReport:
    abo: float
    abo_per_class: dict[str, float]
    mabo: float
    recall_at: dict[float, float]
    curve: list[tuple[float, float]] = field(default_factory=list)
    num_proposals: int = 0
    num_ground_truth: int = 0

    def to_dict(self) -> dict:
        return {
            "abo": self.abo,
            "abo_per_class": dict(sorted(self.abo_per_class.items())),
            "mabo": self.mabo,
            "recall_at": {f"{k:g}": v for k, v in sorted(self.recall_at.items())},
            "curve": [[eta, r] for eta, r in self.curve],
            "num_proposals": self.num_proposals,
            "num_ground_truth": self.num_ground_truth,
        }


def tube_overlap(d: TubePath, g: GroundTruthTube) -> float:
    lo, hi = max(d.start, g.start), min(d.end, g.end)
    if lo > hi:
        return 0.0
    union = max(d.end, g.end) - min(d.start, g.start) + 1
    return sum(iou(d.box_at(t), g.box_at(t)) for t in range(lo, hi + 1)) / union


def best_overlaps(proposals: Sequence[TubePath], gts: Sequence[GroundTruthTube]) -> list[float]:
    """max over proposals of OV, for each ground truth (0 without proposals)."""
    return [max((tube_overlap(d, g) for d in proposals), default=0.0) for g in gts]


def abo(proposals: Sequence[TubePath], gts: Sequence[GroundTruthTube]) -> float:
    if not gts:
        raise ValueError("ABO needs at least one ground-truth tube")
    best = best_overlaps(proposals, gts)
    return sum(best) / len(best)


def mabo(proposals: Sequence[TubePath], gts_by_class: Mapping[str, Sequence[GroundTruthTube]]):
    """Returns ``(abo_per_class, mabo)``; classes are weighted equally."""
    if not gts_by_class:
        raise ValueError("MABO needs at least one class")
    per_class = {}
    for c in sorted(gts_by_class):
        if not gts_by_class[c]:
            raise ValueError(f"class {c!r} has no ground-truth tubes")
        per_class[c] = abo(proposals, gts_by_class[c])
    return per_class, sum(per_class.values()) / len(per_class)


def recall_curve(proposals, gts, thresholds: Sequence[float] | None = None):
    """(eta, fraction of ground truths whose best overlap is >= eta) pairs."""
    thresholds = default_thresholds() if thresholds is None else list(thresholds)
    for eta in thresholds:
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"threshold {eta} outside [0, 1]")
    if not gts:
        return [(eta, 0.0) for eta in thresholds]
    best = np.asarray(best_overlaps(proposals, gts))
    return [(eta, float(np.count_nonzero(best >= eta)) / len(best)) for eta in thresholds]


def group_by_class(gts: Sequence[GroundTruthTube]) -> dict[str, list[GroundTruthTube]]:
    out = defaultdict(list)
    for g in gts:
        out[g.class_label].append(g)
    return dict(out)


def evaluate(per_video: Sequence[tuple[Sequence[TubePath], Sequence[GroundTruthTube]]],
             thresholds: Sequence[float] | None = None,
             recall_points: Sequence[float] = (0.5,)) -> MetricsReport:
    """Scores a dataset; proposals only ever match ground truth of their own video."""
    thresholds = default_thresholds() if thresholds is None else list(thresholds)
    best, labels = [], []
    n_props = 0
    for props, gts in per_video:
        n_props += len(props)
        best.extend(best_overlaps(props, gts))
        labels.extend(g.class_label for g in gts)
    if not best:
        raise ValueError("no ground-truth tubes to evaluate against")
    best_arr = np.asarray(best)
    per_class = {}
    for c in sorted(set(labels)):
        sel = [b for b, lab in zip(best, labels) if lab == c]
        per_class[c] = sum(sel) / len(sel)
    curve = [(eta, float(np.count_nonzero(best_arr >= eta)) / len(best)) for eta in thresholds]
    recall_at = {
        eta: float(np.count_nonzero(best_arr >= eta)) / len(best) for eta in recall_points
    }
    return MetricsReport(
        abo=sum(best) / len(best),
        abo_per_class=per_class,
        mabo=sum(per_class.values()) / len(per_class),
        recall_at=recall_at,
        curve=curve,
        num_proposals=n_props,
        num_ground_truth=len(best),
    )
