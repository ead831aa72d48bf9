"""Connected-component labeling of lung masks and the lobe-area ratios.

Regions are ordered by area (largest first), so the largest detected area
(LLA) is ``regions[0]``, the second largest (LA) is ``regions[1]`` and the
smallest (SA) is ``regions[-1]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .geometry import BoundingBox
from .raster_io import BitMask

__all__ = [
    "Region",
    "RegionSet",
    "RegionRatios",
    "label_regions",
    "ratio_params",
    "off_identity",
]

_STRUCTURES = {
    "four": ndimage.generate_binary_structure(2, 1),
    "eight": ndimage.generate_binary_structure(2, 2),
}


@dataclass(frozen=True)
class Region:
    label: int
    area: int
    box: BoundingBox

    def __post_init__(self):
        if self.label < 1:
            raise ValueError("region labels are positive")
        if self.area < 1 or self.area > self.box.width * self.box.height:
            raise ValueError(f"area {self.area} incompatible with box {self.box}")


@dataclass(frozen=True)
class RegionSet:
    regions: tuple
    source_w: int
    source_h: int
    # label image matching ``regions`` (0 = background); not part of equality
    labels: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    def __getitem__(self, i):
        return self.regions[i]

    @property
    def areas(self):
        return [r.area for r in self.regions]

    def __eq__(self, other):
        if not isinstance(other, RegionSet):
            return NotImplemented
        return (self.regions, self.source_w, self.source_h) == (
            other.regions,
            other.source_w,
            other.source_h,
        )

    def __hash__(self):
        return hash((self.regions, self.source_w, self.source_h))


def label_regions(mask: BitMask, connectivity: str = "eight", min_area: int = 0) -> RegionSet:
    """Label the connected foreground components of ``mask``.

    Parameters
    ----------
    mask : BitMask
    connectivity : {"eight", "four"}
    min_area : int, optional
        Drop components with fewer pixels than this. The default keeps every
        component, including single-pixel specks.

    Returns
    -------
    RegionSet
        Regions sorted by descending area; ties keep raster-scan order of
        each component's first pixel. Labels are renumbered ``1..k`` in
        that order.
    """
    try:
        structure = _STRUCTURES[connectivity]
    except KeyError:
        raise ValueError(f"connectivity must be 'four' or 'eight', got {connectivity!r}") from None

    raw, k = ndimage.label(mask.bits, structure=structure)
    if k == 0:
        return RegionSet((), mask.width, mask.height, np.zeros(mask.shape, dtype=np.int32))

    areas = np.bincount(raw.ravel(), minlength=k + 1)[1:]
    slices = ndimage.find_objects(raw)
    # ndimage numbers components in raster-scan order of their first pixel
    order = sorted(range(k), key=lambda i: (-areas[i], i))
    order = [i for i in order if areas[i] >= max(min_area, 1)]

    relabel = np.zeros(k + 1, dtype=np.int32)
    regions = []
    for new, i in enumerate(order, start=1):
        sy, sx = slices[i]
        box = BoundingBox(sx.start, sy.start, sx.stop, sy.stop)
        regions.append(Region(new, int(areas[i]), box))
        relabel[i + 1] = new
    return RegionSet(tuple(regions), mask.width, mask.height, relabel[raw])


@dataclass(frozen=True)
class RegionRatios:
    sa_over_lla: Optional[float]
    la_over_lla: Optional[float]
    region_count: int

    @property
    def degenerate(self) -> bool:
        return self.region_count < 2


def ratio_params(rs: RegionSet) -> RegionRatios:
    """SA/LLA and LA/LLA of a region set; both absent with fewer than two regions."""
    areas = sorted(rs.areas, reverse=True)
    if len(areas) < 2:
        return RegionRatios(None, None, len(areas))
    lla = areas[0]
    return RegionRatios(areas[-1] / lla, areas[1] / lla, len(areas))


def off_identity(rr: RegionRatios, tau: float = 0.0) -> bool:
    """True when the ratio pair leaves the identity line by more than ``tau``."""
    if rr.degenerate:
        raise ValueError("degenerate ratio record (fewer than two regions)")
    return (rr.la_over_lla - rr.sa_over_lla) > tau
