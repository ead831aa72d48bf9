import csv
import json
import re

import numpy as np
import pytest

from lungqa.geometry import BoundingBox, rescale_box
from lungqa.manifest import ManifestEntry, ManifestError, QaConfig, load_config, read_manifest, write_manifest
from lungqa.pipeline import read_pairs, run_crop, run_overlap, overlap_csv, run_prep, run_qa
from lungqa.plots import plot_cbb, plot_ratio
from lungqa.raster_io import Raster, load_gray, save_gray
from lungqa.report import ImageRecord, QaReport, class_summary
from lungqa.synthetic import ellipse, lung_image, lung_mask, make_dataset


def _save(path, arr):
    save_gray(Raster(np.asarray(arr, np.uint8)), path)
    return str(path)


# --- manifest & config ---------------------------------------------------------------

def test_read_manifest_resolves_and_merges_classes(tmp_path):
    (tmp_path / "m.csv").write_text(
        "image_id,class_label,image_path,mask_path\n"
        "a,COVID-19,img/a.png,mask/a.png\n"
        "b,Normal,/abs/b.png,mask/b.png\n"
        "c,pneumonia,img/c.png,mask/c.png\n"
    )
    entries = read_manifest(tmp_path / "m.csv")
    assert [e.class_label for e in entries] == ["abnormal", "normal", "abnormal"]
    assert entries[0].image_path == str(tmp_path / "img" / "a.png")
    assert entries[1].image_path == "/abs/b.png"
    assert entries[0].truth_mask_path is None


@pytest.mark.parametrize(
    "body, msg",
    [
        ("image_id,class_label,image_path\n", "missing column"),
        ("image_id,class_label,image_path,mask_path\na,normal,x,y\na,normal,x,y\n", "duplicate"),
        ("image_id,class_label,image_path,mask_path\na,cat,x,y\n", "unknown class"),
        ("image_id,class_label,image_path,mask_path\na,normal,,y\n", "empty"),
    ],
)
def test_manifest_errors(tmp_path, body, msg):
    (tmp_path / "m.csv").write_text(body)
    with pytest.raises(ManifestError, match=msg):
        read_manifest(tmp_path / "m.csv")


def test_manifest_round_trip(tmp_path):
    entries = [ManifestEntry("a", "normal", str(tmp_path / "i.png"), str(tmp_path / "m.png"),
                             str(tmp_path / "t.png"))]
    write_manifest(entries, tmp_path / "m.csv")
    assert read_manifest(tmp_path / "m.csv") == entries


def test_load_config(tmp_path):
    p = tmp_path / "qa.conf"
    p.write_text("# defaults overridden\nthreshold = 100\nconnectivity=four\n"
                 "support-fraction = 0.75\nnormalize_cbb = yes\nseed = 9  # trailing\n")
    cfg = load_config(p)
    assert (cfg.threshold, cfg.connectivity, cfg.support_fraction, cfg.normalize_cbb, cfg.seed) == (
        100, "four", 0.75, True, 9)
    assert cfg.starts == 500
    assert cfg.updated(seed=3, tau=None).seed == 3
    p.write_text("bogus = 1\n")
    with pytest.raises(ValueError, match="unknown key"):
        load_config(p)
    with pytest.raises(ValueError):
        QaConfig(threshold=300)


# --- QA --------------------------------------------------------------------------------

def two_lobe(size=64, dx=0, extra=False):
    bits = ellipse((size, size), 20 + dx, 32, 8, 20) | ellipse((size, size), 44 + dx, 32, 8, 19)
    if extra:
        bits |= ellipse((size, size), 5, 60, 3, 2)
    return np.where(bits, 255, 0)


def test_qa_two_masks_is_insufficient(tmp_path):
    entries = [
        ManifestEntry(f"m{i}", "normal", "unused", _save(tmp_path / f"m{i}.png", two_lobe()))
        for i in range(2)
    ]
    report = run_qa(entries, QaConfig(starts=20))
    assert report.mcd_status == "insufficient observations"
    assert all(r.mcd_outlier is None for r in report.records)
    assert len(report.records) == 2


def test_qa_records_failures_and_empty_masks(tmp_path):
    entries = [ManifestEntry("missing", "abnormal", "x", str(tmp_path / "none.png")),
               ManifestEntry("empty", "normal", "x", _save(tmp_path / "e.png", np.zeros((64, 64))))]
    rng = np.random.default_rng(0)
    for i in range(8):
        entries.append(ManifestEntry(f"ok{i}", "normal", "x",
                                     _save(tmp_path / f"ok{i}.png", lung_mask(64, rng).pixels)))
    report = run_qa(entries, QaConfig(starts=50))
    miss, empty = report.records[0], report.records[1]
    assert miss.status == "error" and "none.png" in miss.error
    assert miss.robust_distance is None
    assert empty.status == "no_regions" and (empty.center_x, empty.center_y) == (0.0, 0.0)
    assert empty.degenerate and empty.off_identity is None
    assert empty.mcd_outlier is True         # origin is far from every lung centre
    assert report.summary["mcd"]["n"] == 9
    classes = report.summary["classes"]
    assert classes["abnormal"]["errors"] == 1 and classes["normal"]["no_regions"] == 1


def test_qa_ranks_displaced_lungs_highest(tmp_path):
    rng = np.random.default_rng(42)
    displaced = {3, 17, 40, 61, 88}
    entries = []
    for i in range(100):
        m = lung_mask(96, rng, "displaced" if i in displaced else None)
        entries.append(ManifestEntry(f"i{i}", "normal" if i % 3 else "abnormal", "x",
                                     _save(tmp_path / f"{i}.png", m.pixels)))
    report = run_qa(entries, QaConfig(starts=100, seed=1))
    ranked = sorted(report.records, key=lambda r: -r.robust_distance)
    assert {r.image_id for r in ranked[:5]} == {f"i{i}" for i in displaced}
    assert {r.image_id for r in report.records if r.mcd_outlier} == {f"i{i}" for i in displaced}


def test_qa_normalized_coordinates(tmp_path):
    rng = np.random.default_rng(1)
    entries = [ManifestEntry(f"i{i}", "normal", "x", _save(tmp_path / f"{i}.png", lung_mask(64, rng).pixels))
               for i in range(6)]
    report = run_qa(entries, QaConfig(normalize_cbb=True, starts=20))
    assert report.summary["coordinates"] == "normalized"
    assert all(0.3 < r.center_x < 0.7 for r in report.records)


def test_percentages_and_class_counts_recompute():
    recs = [ImageRecord(f"a{i}", "abnormal", mcd_outlier=i < 374) for i in range(6428)]
    recs += [ImageRecord(f"n{i}", "normal", mcd_outlier=i < 120) for i in range(8851)]
    s = class_summary(recs)
    assert s["abnormal"]["mcd_outliers_percent"] == "5.8%"
    assert s["normal"]["mcd_outliers_percent"] == "1.4%"
    assert s["total"]["mcd_outliers"] == 494 and s["total"]["mcd_outliers_percent"] == "3.2%"
    assert s["abnormal"]["mcd_outliers"] + s["normal"]["mcd_outliers"] == s["total"]["mcd_outliers"]


def test_report_json_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    entries = [ManifestEntry(f"i{i}", "normal", "x", _save(tmp_path / f"{i}.png", lung_mask(64, rng).pixels))
               for i in range(6)]
    report = run_qa(entries, QaConfig(starts=20))
    again = QaReport.from_json(report.to_json())
    assert again.to_json() == report.to_json()
    rows = list(csv.DictReader(report.to_csv().splitlines()))
    assert [r["image_id"] for r in rows] == [f"i{i}" for i in range(6)]
    assert json.loads(report.to_json())["summary"]["tool"]["name"] == "lungqa"


# --- cropping --------------------------------------------------------------------------

def test_crop_full_cover_mask_returns_original(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (40, 30))
    entry = ManifestEntry("full", "normal", _save(tmp_path / "i.png", img),
                          _save(tmp_path / "m.png", np.full((10, 10), 255)))
    rec, = run_crop([entry], QaConfig(), tmp_path / "out")
    assert rec.status == "cropped" and rec.box == (0, 0, 30, 40)
    assert np.array_equal(load_gray(rec.output_path).pixels, img)


def test_crop_rescales_box_from_mask_resolution(tmp_path):
    mask = np.zeros((32, 32))
    mask[5:20, 3:9] = 255
    mask[6:22, 14:21] = 255
    img = np.random.default_rng(1).integers(0, 256, (128, 128))
    entry = ManifestEntry("m", "abnormal", _save(tmp_path / "i.png", img), _save(tmp_path / "m.png", mask))
    rec, = run_crop([entry], QaConfig(), tmp_path / "out")
    # union box (3,5)-(21,22) at 32 px, times 4
    assert rec.box == (12, 20, 84, 88)
    assert np.array_equal(load_gray(rec.output_path).pixels, img[20:88, 12:84])
    assert rescale_box(BoundingBox(3, 5, 21, 22), 32, 32, 128, 128).as_tuple() == rec.box


def test_crop_covers_foreground_at_original_scale(tmp_path):
    rng = np.random.default_rng(5)
    mask = lung_mask(50, rng)
    img = lung_image(mask, 3, rng)
    entry = ManifestEntry("x", "normal", _save(tmp_path / "i.png", img.pixels),
                          _save(tmp_path / "m.png", mask.pixels))
    rec, = run_crop([entry], QaConfig(), tmp_path / "out")
    big = np.kron(mask.pixels >= 128, np.ones((3, 3), bool))
    ys, xs = np.nonzero(big)
    x0, y0, x1, y1 = rec.box
    assert x0 <= xs.min() and y0 <= ys.min() and x1 > xs.max() and y1 > ys.max()


def test_crop_empty_mask_copies_uncropped(tmp_path):
    img = np.arange(64).reshape(8, 8)
    entry = ManifestEntry("z", "normal", _save(tmp_path / "i.png", img), _save(tmp_path / "m.png", np.zeros((4, 4))))
    bad = ManifestEntry("bad", "normal", str(tmp_path / "nope.png"), str(tmp_path / "m.png"))
    rec, err = run_crop([entry, bad], QaConfig(), tmp_path / "out")
    assert rec.status == "no_regions" and rec.box is None
    assert np.array_equal(load_gray(rec.output_path).pixels, img)
    assert err.status == "error" and "nope.png" in err.error


# --- overlap & prep ------------------------------------------------------------------

def test_overlap_pairs(tmp_path):
    a = np.zeros((4, 4)); a[0] = 255
    b = np.zeros((4, 4)); b[0, 2:] = 255; b[1, :2] = 255
    _save(tmp_path / "a.png", a)
    _save(tmp_path / "b.png", b)
    (tmp_path / "pairs.csv").write_text("image_id,pred_path,truth_path\nx,a.png,b.png\ny,a.png,a.png\n"
                                        "z,a.png,missing.png\n")
    rows = run_overlap(read_pairs(tmp_path / "pairs.csv"))
    assert rows[0][1] == pytest.approx(1 / 3) and rows[0][2] == 0.5
    assert rows[1][1:3] == (1.0, 1.0)
    assert rows[2][3] and "missing.png" in rows[2][3]
    text = overlap_csv(rows)
    mean = text.strip().splitlines()[-1].split(",")
    assert mean[0] == "mean" and float(mean[1]) == pytest.approx(2 / 3)


def test_prep_directory(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    _save(src / "a.png", np.full((100, 200), 50))
    (src / "notes.txt").write_text("skip me")
    (src / "broken.pgm").write_bytes(b"P5\n1 1\n255\n")
    results = run_prep(src, tmp_path / "out", 32)
    assert results[0] == ("a.png", None)
    assert results[1][0] == "broken.pgm" and results[1][1]
    assert load_gray(tmp_path / "out" / "a.png").shape == (32, 32)


# --- plots ---------------------------------------------------------------------------------

_CIRCLE = re.compile(r'<circle data-id="([^"]+)" cx="([-\d.]+)" cy="([-\d.]+)"')


def _series(svg, name):
    block = re.search(rf'<g class="series {name}"[^>]*>(.*?)</g>', svg, re.S).group(1)
    return {m[0]: (float(m[1]), float(m[2])) for m in _CIRCLE.findall(block)}


def test_plot_one_inlier_one_outlier():
    rep = QaReport([
        ImageRecord("in", "normal", center_x=10.0, center_y=20.0, mcd_outlier=False, box=(0, 0, 20, 40)),
        ImageRecord("out", "normal", center_x=50.0, center_y=5.0, mcd_outlier=True, box=(0, 0, 100, 10)),
    ])
    svg = plot_cbb(rep)
    assert svg.count("<circle data-id=") == 2
    assert set(_series(svg, "inliers")) == {"in"} and set(_series(svg, "outliers")) == {"out"}
    assert "<text class=\"xlabel\"" in svg and "<text class=\"ylabel\"" in svg


def test_plot_ratio_identity_points_on_line():
    recs = [ImageRecord(f"r{i}", "normal", sa_over_lla=v, la_over_lla=v, off_identity=False,
                        region_count=2, degenerate=False) for i, v in enumerate([0.5, 0.8, 0.97])]
    svg = plot_ratio(QaReport(recs))
    assert 'class="identity"' in svg
    for cx, cy in _series(svg, "inliers").values():
        # identity line runs from (60, 420) to (450, 30): cx + cy == 480
        assert abs(cx + cy - 480) < 0.002


def test_plot_coordinates_parse_back(tmp_path):
    path = make_dataset(tmp_path / "ds", n=20, anomalies={4: "displaced", 9: "third_blob"}, size=64, scale=2)
    report = run_qa(read_manifest(path), QaConfig(starts=50))
    for fn, xk, yk in ((plot_cbb, "center_x", "center_y"), (plot_ratio, "sa_over_lla", "la_over_lla")):
        svg = fn(report)
        area = re.search(r'data-domain="([^"]+)" data-y-down="(\w+)"', svg)
        xmin, xmax, ymin, ymax = map(float, area.group(1).split())
        y_down = area.group(2) == "true"
        left, top, w, h = 60, 30, 390, 390
        pts = {**_series(svg, "inliers"), **_series(svg, "outliers")}
        for r in report.records:
            x, y = getattr(r, xk), getattr(r, yk)
            if x is None:
                assert r.image_id not in pts
                continue
            cx = left + (x - xmin) / (xmax - xmin) * w
            cy = top + ((y - ymin) if y_down else (ymax - y)) / (ymax - ymin) * h
            assert pts[r.image_id] == pytest.approx((cx, cy), abs=6e-4)


def test_plots_reject_empty():
    with pytest.raises(ValueError):
        plot_cbb(QaReport([]))
    with pytest.raises(ValueError):
        plot_ratio(QaReport([ImageRecord("a", "normal", center_x=0.0, center_y=0.0)]))
