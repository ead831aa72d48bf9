"""Command-line interface: ``lungqa {qa,crop,overlap,eval,prep}``.

Exit codes: 0 success, 1 bad input, 2 degenerate statistics.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .classify_eval import PredictionFileError, confusion, metrics, read_predictions
from .manifest import ManifestError, QaConfig, load_config, read_manifest
from .pipeline import (
    read_pairs,
    run_crop,
    run_overlap,
    overlap_csv,
    run_prep,
    run_qa,
    write_crop_index,
)
from .plots import plot_cbb, plot_ratio

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_DEGENERATE = 2

log = logging.getLogger("lungqa")


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _add_common(p, *names):
    opts = {
        "threshold": dict(type=int, help="mask binarization threshold, 0..255 (default 128)"),
        "connectivity": dict(choices=["four", "eight"], help="pixel connectivity (default eight)"),
        "min_area": dict(type=int, help="drop regions smaller than this many pixels (default 0)"),
        "support_fraction": dict(type=float, help="MCD support fraction h/n (default (n+d+1)/2n)"),
        "cutoff_p": dict(type=float, help="chi-square probability of the outlier cutoff (default 0.975)"),
        "tau": dict(type=float, help="off-identity tolerance on LA/LLA - SA/LLA (default 0)"),
        "margin": dict(type=float, help="crop margin as a fraction of box size (default 0)"),
        "seed": dict(type=int, help="MCD random seed (default 0)"),
        "starts": dict(type=int, help="MCD random starts (default 500)"),
        "side": dict(type=int, help="output side length for prep (default 224)"),
        "workers": dict(type=int, help="parallel per-image workers (default 1)"),
    }
    for name in names:
        if name == "normalize_cbb":
            continue
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None, **opts[name])
    if "normalize_cbb" in names:
        p.add_argument("--normalize-cbb", dest="normalize_cbb", action="store_const", const=True,
                       default=None, help="divide box centres by mask width/height")
    p.add_argument("--config", help="key = value configuration file; flags override it")


def _config(args) -> QaConfig:
    cfg = load_config(args.config) if args.config else QaConfig()
    keys = [f for f in cfg.as_dict() if hasattr(args, f)]
    return cfg.updated(**{k: getattr(args, k) for k in keys})


def cmd_qa(args):
    cfg = _config(args)
    report = run_qa(read_manifest(args.manifest), cfg)
    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "qa_report.json"), report.to_json())
    _write(os.path.join(args.out, "qa_records.csv"), report.to_csv())
    for name, fn in (("cbb.svg", plot_cbb), ("ratio.svg", plot_ratio)):
        try:
            _write(os.path.join(args.out, name), fn(report))
        except ValueError as exc:
            log.warning("%s not written: %s", name, exc)
    mcd = report.summary["mcd"]
    total = report.summary["classes"]["total"]
    print(f"images={total['images']} mcd_status={mcd['status']} "
          f"mcd_outliers={total['mcd_outliers']} ({total['mcd_outliers_percent']}) "
          f"off_identity={total['off_identity']} ({total['off_identity_percent']})")
    if mcd["status"] != "ok":
        print(f"lungqa: {mcd['status']}: {mcd.get('error', '')}", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_crop(args):
    cfg = _config(args)
    entries = read_manifest(args.manifest)
    crops = os.path.join(args.out, "crops")
    records = run_crop(entries, cfg, crops)
    write_crop_index(records, os.path.join(args.out, "crop_index.csv"))
    counts = {}
    for r in records:
        counts[r.status] = counts.get(r.status, 0) + 1
    print(" ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return EXIT_OK


def cmd_overlap(args):
    pairs = read_pairs(args.pairs)
    if not pairs:
        print("lungqa: no mask pairs found", file=sys.stderr)
        return EXIT_BAD_INPUT
    rows = run_overlap(pairs, args.threshold if args.threshold is not None else 128)
    text = overlap_csv(rows)
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args):
    rows = read_predictions(args.predictions)
    cm = confusion((t, p) for _, t, p in rows)
    m = metrics(cm)
    text = json.dumps({"n": cm.total, "positive_class": "abnormal",
                       "confusion": cm.as_dict(), "metrics": m.as_dict()},
                      sort_keys=True, indent=2) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_prep(args):
    cfg = _config(args)
    results = run_prep(args.input_dir, args.out, cfg.side)
    failed = [(n, e) for n, e in results if e]
    for name, err in failed:
        print(f"lungqa: {err}", file=sys.stderr)
    print(f"prepared={len(results) - len(failed)} failed={len(failed)}")
    return EXIT_BAD_INPUT if failed and len(failed) == len(results) else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="lungqa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lungqa {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("qa", help="bounding-box-centre MCD outliers and lobe-ratio analysis")
    p.add_argument("manifest")
    p.add_argument("--out", default="qa_out", help="output directory")
    _add_common(p, "threshold", "connectivity", "min_area", "support_fraction", "cutoff_p",
                "tau", "seed", "starts", "workers", "normalize_cbb")
    p.set_defaults(func=cmd_qa)

    p = sub.add_parser("crop", help="crop originals to the rescaled lung bounding box")
    p.add_argument("manifest")
    p.add_argument("--out", default="crop_out", help="output directory")
    _add_common(p, "threshold", "connectivity", "min_area", "margin", "workers")
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser("overlap", help="IoU and Dice of predicted vs reference masks")
    p.add_argument("pairs", help="CSV with image_id,pred_path,truth_path (or a manifest)")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.add_argument("--threshold", type=int, default=None)
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("eval", help="confusion matrix and metrics from a predictions CSV")
    p.add_argument("predictions", help="CSV with image_id,truth,predicted")
    p.add_argument("--out", help="output JSON (default stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("prep", help="pad to square and resize images for the classifier")
    p.add_argument("input_dir")
    p.add_argument("--out", default="prep_out", help="output directory")
    _add_common(p, "side")
    p.set_defaults(func=cmd_prep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ManifestError, PredictionFileError, ValueError, OSError) as exc:
        print(f"lungqa: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
