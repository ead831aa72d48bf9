"""Dataset-level orchestration: mask QA, cropping, overlap scoring, prep.

Per-image work runs in a thread pool when ``config.workers > 1``; results
are always collected in manifest order, so outputs do not depend on
scheduling.
"""
from __future__ import annotations

import csv
import io
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from .geometry import center, classifier_prep, crop, expand_box, rescale_box, union_box
from .manifest import QaConfig
from .overlap import overlap
from .raster_io import RasterIOError, binarize, load_gray, save_gray
from .regions import label_regions, off_identity, ratio_params
from .report import ImageRecord, QaReport, class_summary
from .robust import McdError, DegenerateDataError, chi2_quantile, mcd_fit, support_size_from_fraction

__all__ = [
    "analyze_mask",
    "run_qa",
    "CropRecord",
    "run_crop",
    "write_crop_index",
    "read_pairs",
    "run_overlap",
    "overlap_csv",
    "run_prep",
]

log = logging.getLogger(__name__)

STATUS_INSUFFICIENT = "insufficient observations"
STATUS_DEGENERATE = "degenerate data"


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def analyze_mask(entry, config: QaConfig) -> ImageRecord:
    """Region, ratio and bounding-box statistics for one manifest entry."""
    rec = ImageRecord(entry.image_id, entry.class_label)
    try:
        raster = load_gray(entry.mask_path)
    except RasterIOError as exc:
        rec.status, rec.error = "error", str(exc)
        return rec
    rec.mask_w, rec.mask_h = raster.width, raster.height
    rs = label_regions(binarize(raster, config.threshold), config.connectivity, config.min_area)
    rr = ratio_params(rs)
    rec.region_count = rr.region_count
    rec.degenerate = rr.degenerate
    if not rr.degenerate:
        rec.sa_over_lla = rr.sa_over_lla
        rec.la_over_lla = rr.la_over_lla
        rec.off_identity = off_identity(rr, config.tau)
    box = union_box(rs)
    if box is None:
        rec.status = "no_regions"
    else:
        rec.box = box.as_tuple()
    norm = (raster.width, raster.height) if config.normalize_cbb else None
    c = center(box, norm)
    rec.center_x, rec.center_y = float(c.x), float(c.y)
    return rec


def run_qa(manifest, config: Optional[QaConfig] = None) -> QaReport:
    """Bounding-box-centre outlier analysis and ratio analysis over a manifest.

    Every manifest entry gets a record. Unreadable masks are recorded with
    ``status="error"`` and kept out of the MCD fit; masks without regions
    enter the fit at the origin. When the fit cannot run (too few points or
    degenerate data) ``summary["mcd"]["status"]`` says why and no image is
    marked as an MCD outlier.
    """
    config = config or QaConfig()
    records = _map(lambda e: analyze_mask(e, config), list(manifest), config.workers)

    usable = [r for r in records if r.status != "error"]
    pts = np.array([[r.center_x, r.center_y] for r in usable], dtype=np.float64).reshape(-1, 2)
    n, d = pts.shape
    mcd = {
        "status": "ok",
        "n": n,
        "d": d,
        "support_fraction": config.support_fraction,
        "cutoff_p": config.cutoff_p,
        "cutoff": float(np.sqrt(chi2_quantile(d, config.cutoff_p))),
        "seed": config.seed,
        "starts": config.starts,
    }
    if n < d + 2:
        mcd["status"] = STATUS_INSUFFICIENT
        mcd["error"] = f"need at least {d + 2} usable images, got {n}"
    else:
        h = support_size_from_fraction(n, d, config.support_fraction)
        mcd["h"] = h
        try:
            fit = mcd_fit(pts, h=h, seed=config.seed, n_starts=config.starts,
                          cutoff_p=config.cutoff_p)
        except DegenerateDataError as exc:
            mcd["status"] = STATUS_DEGENERATE
            mcd["error"] = str(exc)
        except McdError as exc:
            mcd["status"] = STATUS_INSUFFICIENT
            mcd["error"] = str(exc)
        else:
            for r, dist, flag in zip(usable, fit.distances, fit.outlier):
                r.robust_distance = float(dist)
                r.mcd_outlier = bool(flag)
            mcd.update(
                location=[float(v) for v in fit.location],
                scatter=[[float(v) for v in row] for row in fit.scatter],
                raw_location=[float(v) for v in fit.raw_location],
                raw_det=float(fit.raw_det),
                consistency=float(fit.consistency),
            )
    if mcd["status"] != "ok":
        log.warning("MCD not computed: %s", mcd.get("error"))

    summary = {
        "tool": {"name": "lungqa", "version": __version__},
        # worker count does not affect results, keep it out of the report
        "config": {k: v for k, v in config.as_dict().items() if k != "workers"},
        "coordinates": "normalized" if config.normalize_cbb else "pixels",
        "mcd": mcd,
        "classes": class_summary(records),
    }
    return QaReport(records, summary)


# --- cropping -----------------------------------------------------------------

@dataclass
class CropRecord:
    image_id: str
    status: str                     # cropped | no_regions | error
    box: Optional[tuple] = None     # at original resolution, margin applied
    orig_w: Optional[int] = None
    orig_h: Optional[int] = None
    output_path: Optional[str] = None
    error: Optional[str] = None


_SAFE = re.compile(r"[^A-Za-z0-9._-]+")


def _safe_name(image_id):
    return _SAFE.sub("_", image_id) or "image"


def _crop_one(entry, config, out_dir):
    rec = CropRecord(entry.image_id, "error")
    try:
        image = load_gray(entry.image_path)
        mask = load_gray(entry.mask_path)
    except RasterIOError as exc:
        rec.error = str(exc)
        return rec
    rec.orig_w, rec.orig_h = image.width, image.height
    rs = label_regions(binarize(mask, config.threshold), config.connectivity, config.min_area)
    box = union_box(rs)
    out_path = os.path.join(out_dir, _safe_name(entry.image_id) + ".png")
    if box is None:
        rec.status = "no_regions"
        result = image
    else:
        full = rescale_box(box, mask.width, mask.height, image.width, image.height)
        try:
            final = expand_box(full, config.margin, image.width, image.height)
        except ValueError as exc:
            rec.error = str(exc)
            return rec
        rec.status, rec.box = "cropped", final.as_tuple()
        result = crop(image, final)
    try:
        save_gray(result, out_path)
    except RasterIOError as exc:
        rec.status, rec.error = "error", str(exc)
        return rec
    rec.output_path = out_path
    return rec


def run_crop(manifest, config: Optional[QaConfig] = None, out_dir="crops") -> list:
    """Crop each original image to its lung bounding box.

    The box is computed on the mask, rescaled outward to the image's own
    resolution and expanded by ``config.margin``. Images with no detected
    region are copied uncropped with ``status="no_regions"``.
    """
    config = config or QaConfig()
    os.makedirs(out_dir, exist_ok=True)
    return _map(lambda e: _crop_one(e, config, out_dir), list(manifest), config.workers)


def write_crop_index(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id", "status", "x0", "y0", "x1", "y1", "orig_w", "orig_h",
                    "output_path", "error"])
        for r in records:
            box = r.box or ("", "", "", "")
            w.writerow([r.image_id, r.status, *box, r.orig_w or "", r.orig_h or "",
                        r.output_path or "", r.error or ""])


# --- overlap -------------------------------------------------------------------

def read_pairs(path):
    """Read ``(image_id, pred_path, truth_path)`` triples.

    Accepts either a pairs CSV (``image_id,pred_path,truth_path``) or a
    manifest with ``mask_path`` and ``truth_mask_path`` columns; entries
    without a truth mask are skipped.
    """
    base = os.path.dirname(os.path.abspath(path))
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = {c.strip().lower() for c in reader.fieldnames or []}
        if {"pred_path", "truth_path"} <= cols:
            pk, tk = "pred_path", "truth_path"
        elif {"mask_path", "truth_mask_path"} <= cols:
            pk, tk = "mask_path", "truth_mask_path"
        else:
            raise ValueError(f"{path}: need pred_path/truth_path or mask_path/truth_mask_path columns")
        if "image_id" not in cols:
            raise ValueError(f"{path}: missing image_id column")
        out = []
        for rec in reader:
            rec = {k.strip().lower(): (v or "").strip() for k, v in rec.items() if k is not None}
            if not rec.get(tk):
                continue
            out.append((rec["image_id"],
                        os.path.join(base, rec[pk]), os.path.join(base, rec[tk])))
    return out


def run_overlap(pairs, threshold: int = 128, workers: int = 1):
    """Per-image ``(image_id, iou, dice, error)`` rows for mask pairs."""

    def one(p):
        image_id, pred_path, truth_path = p
        try:
            pred = binarize(load_gray(pred_path), threshold)
            truth = binarize(load_gray(truth_path), threshold)
            s = overlap(pred, truth)
        except (RasterIOError, ValueError) as exc:
            return (image_id, None, None, str(exc))
        return (image_id, s.iou, s.dice, None)

    return _map(one, list(pairs), workers)


def overlap_csv(rows) -> str:
    """CSV with one line per image and a final ``mean`` line over scored images."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["image_id", "iou", "dice", "error"])
    for image_id, iou, dice, err in rows:
        w.writerow([image_id, "" if iou is None else repr(iou), "" if dice is None else repr(dice),
                    err or ""])
    scored = [(i, d) for _, i, d, e in rows if e is None]
    if scored:
        w.writerow(["mean", repr(float(np.mean([s[0] for s in scored]))),
                    repr(float(np.mean([s[1] for s in scored]))), ""])
    return buf.getvalue()


# --- classifier pre-processing -----------------------------------------------------

_IMAGE_EXT = (".png", ".pgm")


def run_prep(in_dir, out_dir, side: int = 224):
    """Pad-to-square and resize every PNG/PGM in ``in_dir``; returns ``(name, error)`` pairs."""
    os.makedirs(out_dir, exist_ok=True)
    results = []
    for name in sorted(os.listdir(in_dir)):
        if not name.lower().endswith(_IMAGE_EXT):
            continue
        stem = os.path.splitext(name)[0]
        try:
            img = load_gray(os.path.join(in_dir, name))
            save_gray(classifier_prep(img, side), os.path.join(out_dir, stem + ".png"))
        except RasterIOError as exc:
            results.append((name, str(exc)))
            continue
        results.append((name, None))
    return results
