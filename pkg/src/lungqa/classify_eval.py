"""Normal-vs-abnormal classification metrics from externally produced predictions.

The positive class is ``abnormal`` (pneumonia and COVID-19 merged).
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "ConfusionMatrix",
    "MetricsRow",
    "PredictionFileError",
    "parse_label",
    "confusion",
    "metrics",
    "reconstruct_counts",
    "read_predictions",
]

POSITIVE = "abnormal"
NEGATIVE = "normal"
_LABELS = (NEGATIVE, POSITIVE)


class PredictionFileError(ValueError):
    pass


def parse_label(value: str) -> str:
    label = str(value).strip().lower()
    if label not in _LABELS:
        raise ValueError(f"unknown label {value!r}; expected 'normal' or 'abnormal'")
    return label


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def as_dict(self):
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class MetricsRow:
    accuracy: float
    sensitivity: float
    precision: float
    f1: float
    # names of metrics whose denominator was zero and were set to 0.0
    undefined: tuple = field(default=(), compare=False)

    def as_tuple(self):
        return (self.accuracy, self.sensitivity, self.precision, self.f1)

    def as_dict(self):
        return {
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "precision": self.precision,
            "f1": self.f1,
            "undefined": list(self.undefined),
        }


def confusion(preds) -> ConfusionMatrix:
    """Tally ``(truth, predicted)`` label pairs into a confusion matrix."""
    tp = fp = fn = tn = 0
    n = 0
    for truth, predicted in preds:
        t = parse_label(truth) == POSITIVE
        p = parse_label(predicted) == POSITIVE
        tp += t and p
        fn += t and not p
        fp += p and not t
        tn += not t and not p
        n += 1
    if n == 0:
        raise ValueError("no predictions given")
    return ConfusionMatrix(tp, fp, fn, tn)


def _ratio(num, den, name, undefined):
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def metrics(cm: ConfusionMatrix) -> MetricsRow:
    """Accuracy, sensitivity (recall), precision and F1.

    A zero denominator yields 0.0 and records the metric name in
    ``MetricsRow.undefined`` instead of producing NaN.
    """
    if cm.total == 0:
        raise ValueError("confusion matrix is empty")
    undefined = []
    acc = (cm.tp + cm.tn) / cm.total
    sens = _ratio(cm.tp, cm.tp + cm.fn, "sensitivity", undefined)
    prec = _ratio(cm.tp, cm.tp + cm.fp, "precision", undefined)
    # F1 from counts, 2TP / (2TP + FP + FN), equals the harmonic mean
    f1 = _ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn, "f1", undefined)
    return MetricsRow(acc, sens, prec, f1, tuple(undefined))


def reconstruct_counts(row, n_pos: int, n_neg: int, decimals: int = 3) -> Optional[ConfusionMatrix]:
    """Find an integer confusion matrix reproducing a published metrics row.

    Searches every ``tp in 0..n_pos`` and ``fp in 0..n_neg`` for a matrix
    whose four metrics round to ``row`` at ``decimals`` places. Among
    matches the one closest to the row (sum of absolute errors) wins, then
    the smallest ``(tp, fp)``. Returns ``None`` if no matrix fits.

    ``row`` is a :class:`MetricsRow` or an ``(accuracy, sensitivity,
    precision, f1)`` sequence.
    """
    if n_pos <= 0 or n_neg <= 0:
        raise ValueError("class sizes must be positive")
    target = np.asarray(row.as_tuple() if isinstance(row, MetricsRow) else row, dtype=float)
    half = 0.5 * 10.0 ** (-decimals) + 1e-12

    tp = np.arange(n_pos + 1, dtype=np.int64)[:, None]
    fp = np.arange(n_neg + 1, dtype=np.int64)[None, :]
    fn = n_pos - tp
    tn = n_neg - fp
    with np.errstate(divide="ignore", invalid="ignore"):
        acc = (tp + tn) / (n_pos + n_neg)
        sens = np.broadcast_to(tp / n_pos, acc.shape)
        prec = np.where(tp + fp > 0, tp / np.maximum(tp + fp, 1), 0.0)
        f1 = np.where(2 * tp + fp + fn > 0, 2 * tp / np.maximum(2 * tp + fp + fn, 1), 0.0)
    err = np.stack([acc, sens, prec, f1]) - target[:, None, None]
    ok = np.all(np.abs(err) <= half, axis=0)
    if not ok.any():
        return None
    score = np.where(ok, np.abs(err).sum(axis=0), np.inf)
    i, j = np.unravel_index(np.argmin(score), score.shape)
    return ConfusionMatrix(int(i), int(j), int(n_pos - i), int(n_neg - j))


def read_predictions(path):
    """Read a ``image_id,truth,predicted`` CSV into ``(image_id, truth, predicted)`` tuples."""
    path = os.fspath(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            fields = [f.strip().lower() for f in (reader.fieldnames or [])]
            missing = {"image_id", "truth", "predicted"} - set(fields)
            if missing:
                raise PredictionFileError(f"{path}: missing column(s) {sorted(missing)}")
            rows = []
            for lineno, rec in enumerate(reader, start=2):
                rec = {k.strip().lower(): v for k, v in rec.items() if k is not None}
                try:
                    rows.append((rec["image_id"].strip(), parse_label(rec["truth"]),
                                 parse_label(rec["predicted"])))
                except (ValueError, AttributeError) as exc:
                    raise PredictionFileError(f"{path}:{lineno}: {exc}") from None
    except OSError as exc:
        raise PredictionFileError(f"{path}: {exc.strerror or exc}") from exc
    if not rows:
        raise PredictionFileError(f"{path}: no predictions")
    return rows
