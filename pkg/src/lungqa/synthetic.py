"""Synthetic two-lobe lung masks for demos and end-to-end tests.

A normal mask holds two filled ellipses whose common position jitters
uniformly inside a small disc. Two kinds of anomaly can be planted:
``"displaced"`` shifts both lobes far from the usual position and
``"third_blob"`` adds a spurious region away from the lungs.
"""
from __future__ import annotations

import os

import numpy as np

from .manifest import ManifestEntry, write_manifest
from .raster_io import Raster, save_gray

__all__ = ["ellipse", "lung_mask", "lung_image", "make_dataset"]


def ellipse(shape, cx, cy, rx, ry) -> np.ndarray:
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    return ((xx + 0.5 - cx) / rx) ** 2 + ((yy + 0.5 - cy) / ry) ** 2 <= 1.0


def lung_mask(size=128, rng=None, anomaly=None, jitter=3.0) -> Raster:
    rng = np.random.default_rng(rng)
    r = jitter * np.sqrt(rng.uniform())
    theta = rng.uniform(0, 2 * np.pi)
    dx, dy = r * np.cos(theta), r * np.sin(theta)
    if anomaly == "displaced":
        dx += 0.22 * size
        dy += 0.18 * size
    s = size
    rx = 0.11 * s + rng.uniform(-0.5, 0.5)
    ry = 0.24 * s + rng.uniform(-0.5, 0.5)
    left = ellipse((s, s), 0.34 * s + dx, 0.48 * s + dy, rx, ry)
    right = ellipse((s, s), 0.66 * s + dx, 0.48 * s + dy, rx * 1.05, ry * 0.97)
    bits = left | right
    if anomaly == "third_blob":
        bits |= ellipse((s, s), 0.12 * s, 0.92 * s, 0.05 * s, 0.04 * s)
    elif anomaly not in (None, "displaced"):
        raise ValueError(f"unknown anomaly {anomaly!r}")
    return Raster(np.where(bits, 255, 0).astype(np.uint8))


def lung_image(mask: Raster, scale=4, rng=None) -> Raster:
    """A textured "radiograph" ``scale`` times larger than ``mask``."""
    rng = np.random.default_rng(rng)
    big = np.kron(mask.pixels >= 128, np.ones((scale, scale), dtype=bool))
    base = rng.integers(120, 200, size=big.shape)
    return Raster(np.where(big, base // 3, base).astype(np.uint8))


def make_dataset(out_dir, n=100, anomalies=None, size=128, scale=4, seed=0):
    """Write masks, originals and ``manifest.csv`` into ``out_dir``.

    ``anomalies`` maps image index to anomaly kind. Returns the manifest
    path. Classes alternate abnormal/normal.
    """
    anomalies = anomalies or {}
    rng = np.random.default_rng(seed)
    os.makedirs(os.path.join(out_dir, "masks"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    entries = []
    for i in range(n):
        image_id = f"img{i:03d}"
        mask = lung_mask(size, rng, anomalies.get(i))
        mask_rel = os.path.join("masks", image_id + ".png")
        img_rel = os.path.join("images", image_id + ".png")
        save_gray(mask, os.path.join(out_dir, mask_rel))
        save_gray(lung_image(mask, scale, rng), os.path.join(out_dir, img_rel))
        entries.append(ManifestEntry(image_id, "abnormal" if i % 2 == 0 else "normal",
                                     img_rel, mask_rel))
    path = os.path.join(out_dir, "manifest.csv")
    write_manifest(entries, path)
    return path
