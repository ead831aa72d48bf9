"""Standalone SVG scatter plots of bounding-box centres and lobe-area ratios.

Each plot has a ``<g class="plot-area">`` whose ``data-domain`` attribute
holds ``xmin xmax ymin ymax`` and whose ``data-y-down`` attribute says
whether data y grows downward (image coordinates) or upward. With the
plot area at ``(left, top)`` of size ``width x height`` a point maps to::

    cx = left + (x - xmin) / (xmax - xmin) * width
    cy = top + (y - ymin) / (ymax - ymin) * height        # y-down
    cy = top + (ymax - y) / (ymax - ymin) * height        # y-up

Coordinates are printed with three decimals. Inliers and outliers are
``<circle>`` elements inside ``<g class="series inliers">`` and
``<g class="series outliers">``.
"""
from __future__ import annotations

from xml.sax.saxutils import quoteattr

__all__ = ["plot_cbb", "plot_ratio", "PLOT_BOX"]

SIZE = (480, 480)
PLOT_BOX = (60, 30, 390, 390)   # left, top, width, height
_COLORS = {"inliers": "#1f5fbf", "outliers": "#d62728"}


def _fmt(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def _ticks(lo, hi, n=5):
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _svg(title, xlabel, ylabel, domain, y_down, series, extra=""):
    left, top, width, height = PLOT_BOX
    xmin, xmax, ymin, ymax = domain

    def sx(x):
        return left + (x - xmin) / (xmax - xmin) * width

    def sy(y):
        if y_down:
            return top + (y - ymin) / (ymax - ymin) * height
        return top + (ymax - y) / (ymax - ymin) * height

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE[0]}" height="{SIZE[1]}" '
        f'viewBox="0 0 {SIZE[0]} {SIZE[1]}" font-family="sans-serif" font-size="11">',
        f"<title>{title}</title>",
        f'<rect x="0" y="0" width="{SIZE[0]}" height="{SIZE[1]}" fill="white"/>',
        f'<rect class="frame" x="{left}" y="{top}" width="{width}" height="{height}" '
        'fill="none" stroke="black"/>',
    ]
    for t in _ticks(xmin, xmax):
        out.append(f'<text class="tick" x="{_fmt(sx(t))}" y="{top + height + 15}" '
                   f'text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(ymin, ymax):
        out.append(f'<text class="tick" x="{left - 5}" y="{_fmt(sy(t) + 4)}" '
                   f'text-anchor="end">{t:.3g}</text>')
    out.append(f'<text class="xlabel" x="{left + width / 2:g}" y="{SIZE[1] - 25}" '
               f'text-anchor="middle">{xlabel}</text>')
    out.append(f'<text class="ylabel" x="15" y="{top + height / 2:g}" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + height / 2:g})">{ylabel}</text>')
    out.append(
        f'<g class="plot-area" data-domain="{xmin!r} {xmax!r} {ymin!r} {ymax!r}" '
        f'data-y-down="{"true" if y_down else "false"}">'
    )
    out.append(extra and extra(sx, sy) or "")
    for name in ("inliers", "outliers"):
        out.append(f'<g class="series {name}" fill="{_COLORS[name]}" fill-opacity="0.7">')
        for pid, x, y in series[name]:
            out.append(f'<circle data-id={quoteattr(pid)} cx="{_fmt(sx(x))}" '
                       f'cy="{_fmt(sy(y))}" r="3"/>')
        out.append("</g>")
    out.append("</g>")
    lx = left + width - 90
    out.append(f'<g class="legend"><circle cx="{lx}" cy="{top + 12}" r="4" fill="{_COLORS["inliers"]}"/>'
               f'<text x="{lx + 8}" y="{top + 16}">inliers</text>'
               f'<circle cx="{lx}" cy="{top + 28}" r="4" fill="{_COLORS["outliers"]}"/>'
               f'<text x="{lx + 8}" y="{top + 32}">outliers</text></g>')
    out.append("</svg>")
    return "\n".join(s for s in out if s) + "\n"


def _padded(lo, hi):
    if hi == lo:
        return lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def plot_cbb(report) -> str:
    """Scatter of bounding-box centres, MCD outliers as a separate series.

    Images whose mask could not be read are skipped; images without any
    region sit at the origin.
    """
    pts = [r for r in report.records if r.status != "error" and r.center_x is not None]
    if not pts:
        raise ValueError("no bounding-box centres to plot")
    xs = [r.center_x for r in pts]
    ys = [r.center_y for r in pts]
    domain = (*_padded(min(xs), max(xs)), *_padded(min(ys), max(ys)))
    series = {"inliers": [], "outliers": []}
    for r in pts:
        series["outliers" if r.mcd_outlier else "inliers"].append((r.image_id, r.center_x, r.center_y))
    unit = "normalized" if report.summary.get("coordinates") == "normalized" else "pixels"
    return _svg("Centers of bounding boxes", f"CBB x ({unit})", f"CBB y ({unit})",
                domain, True, series)


def plot_ratio(report) -> str:
    """LA/LLA against SA/LLA with the identity line; off-identity points are outliers."""
    pts = [r for r in report.records if r.sa_over_lla is not None]
    if not pts:
        raise ValueError("no ratio records to plot (every image has fewer than two regions)")
    series = {"inliers": [], "outliers": []}
    for r in pts:
        series["outliers" if r.off_identity else "inliers"].append((r.image_id, r.sa_over_lla, r.la_over_lla))

    def identity(sx, sy):
        return (f'<line class="identity" x1="{_fmt(sx(0.0))}" y1="{_fmt(sy(0.0))}" '
                f'x2="{_fmt(sx(1.0))}" y2="{_fmt(sy(1.0))}" stroke="gray" stroke-dasharray="4 3"/>')

    return _svg("LA/LLA as a function of SA/LLA", "SA/LLA", "LA/LLA",
                (0.0, 1.0, 0.0, 1.0), False, series, extra=identity)
