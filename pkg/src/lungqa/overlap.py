"""IoU and Dice between predicted and reference lung masks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster_io import BitMask

__all__ = ["OverlapCounts", "OverlapScores", "overlap_counts", "overlap", "mean_overlap"]


@dataclass(frozen=True)
class OverlapCounts:
    pred: int
    truth: int
    intersection: int

    @property
    def union(self) -> int:
        return self.pred + self.truth - self.intersection


@dataclass(frozen=True)
class OverlapScores:
    iou: float
    dice: float


def overlap_counts(pred: BitMask, truth: BitMask) -> OverlapCounts:
    if pred.shape != truth.shape:
        raise ValueError(f"mask dimensions differ: {pred.shape} vs {truth.shape}")
    return OverlapCounts(
        pred=int(np.count_nonzero(pred.bits)),
        truth=int(np.count_nonzero(truth.bits)),
        intersection=int(np.count_nonzero(pred.bits & truth.bits)),
    )


def overlap(pred: BitMask, truth: BitMask) -> OverlapScores:
    """IoU and Dice from exact pixel counts.

    Two empty masks agree perfectly and score 1.0.
    """
    c = overlap_counts(pred, truth)
    if c.union == 0:
        return OverlapScores(1.0, 1.0)
    return OverlapScores(c.intersection / c.union, 2 * c.intersection / (c.pred + c.truth))


def mean_overlap(pairs) -> OverlapScores:
    """Arithmetic mean of per-pair scores."""
    scores = [overlap(p, t) for p, t in pairs]
    if not scores:
        raise ValueError("mean_overlap needs at least one mask pair")
    return OverlapScores(
        float(np.mean([s.iou for s in scores])),
        float(np.mean([s.dice for s in scores])),
    )
