"""QA report records and their JSON/CSV serialization.

Serialization is byte-deterministic: keys are sorted, floats use Python's
shortest round-trip repr, and nothing time- or host-dependent is written.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

from .robust import format_percent

__all__ = ["ImageRecord", "QaReport", "class_summary", "CSV_COLUMNS"]


@dataclass
class ImageRecord:
    image_id: str
    class_label: str
    status: str = "ok"              # ok | no_regions | error
    error: Optional[str] = None
    mask_w: Optional[int] = None
    mask_h: Optional[int] = None
    region_count: int = 0
    sa_over_lla: Optional[float] = None
    la_over_lla: Optional[float] = None
    degenerate: bool = True
    off_identity: Optional[bool] = None
    box: Optional[tuple] = None
    center_x: Optional[float] = None
    center_y: Optional[float] = None
    robust_distance: Optional[float] = None
    mcd_outlier: Optional[bool] = None

    @property
    def flagged(self) -> bool:
        return bool(self.mcd_outlier) or bool(self.off_identity)


CSV_COLUMNS = [
    "image_id", "class_label", "status", "region_count", "sa_over_lla", "la_over_lla",
    "degenerate", "off_identity", "x0", "y0", "x1", "y1", "center_x", "center_y",
    "robust_distance", "mcd_outlier", "error",
]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def class_summary(records, labels=("abnormal", "normal")) -> dict:
    """Per-class tallies (plus ``total``) recomputed from per-image records."""
    groups = {lab: [] for lab in labels}
    for r in records:
        groups.setdefault(r.class_label, []).append(r)
    groups["total"] = list(records)
    out = {}
    for lab, recs in groups.items():
        n = len(recs)
        mcd = sum(1 for r in recs if r.mcd_outlier)
        off = sum(1 for r in recs if r.off_identity)
        entry = {
            "images": n,
            "mcd_outliers": mcd,
            "off_identity": off,
            "degenerate": sum(1 for r in recs if r.status == "ok" and r.degenerate),
            "no_regions": sum(1 for r in recs if r.status == "no_regions"),
            "errors": sum(1 for r in recs if r.status == "error"),
            "mcd_outliers_percent": format_percent(mcd, n) if n else None,
            "off_identity_percent": format_percent(off, n) if n else None,
        }
        out[lab] = entry
    return out


@dataclass
class QaReport:
    records: list
    summary: dict = field(default_factory=dict)

    def by_id(self, image_id) -> ImageRecord:
        for r in self.records:
            if r.image_id == image_id:
                return r
        raise KeyError(image_id)

    @property
    def mcd_status(self) -> str:
        return self.summary.get("mcd", {}).get("status", "not run")

    def to_dict(self):
        recs = []
        for r in self.records:
            d = asdict(r)
            d["box"] = list(r.box) if r.box is not None else None
            recs.append(d)
        return {"records": recs, "summary": self.summary}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            box = r.box or (None, None, None, None)
            w.writerow([_cell(v) for v in (
                r.image_id, r.class_label, r.status, r.region_count, r.sa_over_lla,
                r.la_over_lla, r.degenerate, r.off_identity, *box, r.center_x, r.center_y,
                r.robust_distance, r.mcd_outlier, r.error,
            )])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, data) -> "QaReport":
        recs = []
        for d in data["records"]:
            d = dict(d)
            if d.get("box") is not None:
                d["box"] = tuple(d["box"])
            recs.append(ImageRecord(**d))
        return cls(recs, data.get("summary", {}))

    @classmethod
    def from_json(cls, text) -> "QaReport":
        return cls.from_dict(json.loads(text))
