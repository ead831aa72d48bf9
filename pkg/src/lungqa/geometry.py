"""Bounding boxes, their centres, rescaling and the crop/pad/resize steps."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .raster_io import Raster, resize

__all__ = [
    "BoundingBox",
    "Point2",
    "union_box",
    "center",
    "rescale_box",
    "expand_box",
    "crop",
    "pad_to_square",
    "classifier_prep",
    "normalize_pixels",
]


@dataclass(frozen=True)
class BoundingBox:
    """Half-open pixel box: ``x0 <= x < x1``, ``y0 <= y < y1``."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (0 <= self.x0 < self.x1 and 0 <= self.y0 < self.y1):
            raise ValueError(f"degenerate or negative box ({self.x0},{self.y0})-({self.x1},{self.y1})")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def contains(self, other: "BoundingBox") -> bool:
        return (
            self.x0 <= other.x0 and self.y0 <= other.y0
            and self.x1 >= other.x1 and self.y1 >= other.y1
        )

    def as_tuple(self):
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("point coordinates must be finite")

    def __iter__(self):
        yield self.x
        yield self.y


def union_box(rs) -> Optional[BoundingBox]:
    """Smallest box covering every region of ``rs``; ``None`` when empty."""
    boxes = [r.box for r in rs]
    if not boxes:
        return None
    return BoundingBox(
        min(b.x0 for b in boxes),
        min(b.y0 for b in boxes),
        max(b.x1 for b in boxes),
        max(b.y1 for b in boxes),
    )


def center(b: Optional[BoundingBox], norm=None) -> Point2:
    """Centre of ``b``, optionally divided by ``norm = (width, height)``.

    A missing box (no lung found) maps to the origin.
    """
    if b is None:
        return Point2(0.0, 0.0)
    cx = (b.x0 + b.x1) / 2
    cy = (b.y0 + b.y1) / 2
    if norm is not None:
        w, h = norm
        if w <= 0 or h <= 0:
            raise ValueError("normalization dimensions must be positive")
        cx, cy = cx / w, cy / h
    return Point2(cx, cy)


def _floor_div(a: int, b: int) -> int:
    return a // b


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def rescale_box(b: BoundingBox, seg_w: int, seg_h: int, orig_w: int, orig_h: int) -> BoundingBox:
    """Map a box from segmentation resolution to the original image.

    Minimum corners are floored and maximum corners ceiled, so the result
    never loses pixels covered by the source box. Exact integer arithmetic.
    """
    if min(seg_w, seg_h, orig_w, orig_h) < 1:
        raise ValueError("dimensions must be >= 1")
    x0 = min(_floor_div(b.x0 * orig_w, seg_w), orig_w - 1)
    y0 = min(_floor_div(b.y0 * orig_h, seg_h), orig_h - 1)
    x1 = min(max(_ceil_div(b.x1 * orig_w, seg_w), x0 + 1), orig_w)
    y1 = min(max(_ceil_div(b.y1 * orig_h, seg_h), y0 + 1), orig_h)
    return BoundingBox(max(x0, 0), max(y0, 0), x1, y1)


def expand_box(b: BoundingBox, margin: float, width: int, height: int) -> BoundingBox:
    """Grow each side by ``margin`` times the box size, then clamp to the image."""
    if margin < 0:
        raise ValueError("margin must be >= 0")
    dx = margin * b.width
    dy = margin * b.height
    x0 = max(math.floor(b.x0 - dx), 0)
    y0 = max(math.floor(b.y0 - dy), 0)
    x1 = min(math.ceil(b.x1 + dx), width)
    y1 = min(math.ceil(b.y1 + dy), height)
    if x0 >= x1 or y0 >= y1:
        raise ValueError(f"box {b.as_tuple()} is empty after clamping to {width}x{height}")
    return BoundingBox(x0, y0, x1, y1)


def crop(img: Raster, b: BoundingBox, margin: float = 0.0) -> Raster:
    """Copy the pixels inside ``b`` (expanded by ``margin``) out of ``img``."""
    box = expand_box(b, margin, img.width, img.height)
    return Raster(img.pixels[box.y0 : box.y1, box.x0 : box.x1])


def pad_to_square(img: Raster, value: int = 0) -> Raster:
    """Pad the shorter axis symmetrically; an odd remainder goes right/bottom."""
    h, w = img.shape
    side = max(h, w)
    if h == w:
        return img
    left = (side - w) // 2
    top = (side - h) // 2
    out = np.full((side, side), value, dtype=np.uint8)
    out[top : top + h, left : left + w] = img.pixels
    return Raster(out)


def classifier_prep(img: Raster, side: int = 224) -> Raster:
    """Zero-pad to a square and resize bilinearly to ``side`` x ``side``.

    Intensity normalization happens on the float tensor, see
    :func:`normalize_pixels`.
    """
    return resize(pad_to_square(img), side, side, mode="bilinear")


def normalize_pixels(img: Raster, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
    """Scale to ``[0, 1]`` and standardize: ``(p / 255 - mean) / std``."""
    if std <= 0:
        raise ValueError("std must be positive")
    return (img.pixels.astype(np.float32) / 255.0 - mean) / std
